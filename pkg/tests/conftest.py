import pytest

_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the lines are repeated in the terminal summary."""

    def record(number, title, status, detail):
        line = f"[{status}] criterion {number:>2}: {title}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return status == "PASS"

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
