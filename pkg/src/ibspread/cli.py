"""Command line entry point: ``ibspread {bench,sweep-strong,sweep-weak,sweep-grid,verify}``.

Exit status is 0 on success, 1 for a bad configuration and 2 when ``verify``
finds a failing check.
"""

from __future__ import annotations

import argparse
import contextlib
import sys

from .coupling import ALGORITHMS, DEFAULT_SWEEP_WIDTH
from .harness import BenchmarkConfig, ConfigError, render, run_benchmark, scaling_sweep
from .verify import run_checks

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; 2 is reserved for verification
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--points", type=int, default=2**16, help="number of points (default 65536)")
    p.add_argument("--refinement", type=int, nargs="+", default=None,
                   help="grid cells per axis; sweep-grid takes several (default 16 32 64 128, "
                        "otherwise 64)")
    p.add_argument("--workers", type=int, nargs="+", default=None,
                   help="worker count; sweep-strong takes several, or one maximum that is "
                        "doubled up to (default 1, sweep-strong 1 2 4 8)")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="fused")
    p.add_argument("--sweep-width", type=int, default=DEFAULT_SWEEP_WIDTH)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--dt-us", type=float, default=0.1, help="time step in microseconds")
    p.add_argument("--shear-rate", type=float, default=1000.0, help="1/s")
    p.add_argument("--spring-constant", type=float, default=0.01, help="dyn/cm")
    p.add_argument("--length-um", type=float, default=16.0, help="domain edge in micrometres")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None, help="write here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--debug", action="store_true",
                   help="assert that both interpolations of a step agree")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ibspread", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("bench", "run one configuration"),
        ("sweep-strong", "fixed problem, varying workers"),
        ("sweep-weak", "points and workers doubled together"),
        ("sweep-grid", "fixed points, varying grid refinement"),
    ]:
        _add_common(sub.add_parser(name, help=help_))
    sub.choices["sweep-weak"].add_argument("--levels", type=int, default=3)
    v = sub.add_parser("verify", help="run the oracle and invariant checks")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=int, default=20, help="random instances per check")
    v.add_argument("--output", default=None)
    v.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _single(values, default, flag):
    if values is None:
        return default
    if len(values) != 1:
        raise ConfigError(f"{flag} takes a single value here")
    return values[0]


def _config(args, refinement=None, workers=None) -> BenchmarkConfig:
    return BenchmarkConfig(
        length_um=args.length_um,
        refinement=refinement if refinement is not None else _single(args.refinement, 64,
                                                                      "--refinement"),
        n_points=args.points,
        shear_rate=args.shear_rate,
        spring_constant=args.spring_constant,
        dt_us=args.dt_us,
        steps=args.steps,
        workers=workers if workers is not None else _single(args.workers, 1, "--workers"),
        algorithm=args.algorithm,
        sweep_width=args.sweep_width,
        seed=args.seed,
    ).validate()


def _strong_workers(values):
    if values is None:
        return [1, 2, 4, 8]
    if len(values) > 1:
        return values
    top, out, p = values[0], [], 1
    while p <= top:
        out.append(p)
        p *= 2
    return out


@contextlib.contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as f:
            yield f


def _run(args) -> int:
    if args.command == "verify":
        results = run_checks(seed=args.seed, cases=args.cases)
        if args.format == "json":
            text = render([vars(r) for r in results], "json")
        else:
            text = "".join(r.line() + "\n" for r in results)
        with _sink(args.output) as out:
            out.write(text)
        return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY

    if args.command == "bench":
        report = run_benchmark(_config(args), debug=args.debug)
        payload = report.to_dict() if args.format == "json" else report.rows()
    else:
        if args.command == "sweep-strong":
            base = _config(args, workers=1)
            result = scaling_sweep(base, "strong", workers=_strong_workers(args.workers),
                                   debug=args.debug)
        elif args.command == "sweep-weak":
            base = _config(args)
            if args.levels < 1:
                raise ConfigError(f"--levels must be >= 1, got {args.levels}")
            pairs = [(base.n_points * 2**i, base.workers * 2**i) for i in range(args.levels)]
            result = scaling_sweep(base, "weak", pairs=pairs, debug=args.debug)
        else:
            refinements = args.refinement or [16, 32, 64, 128]
            base = _config(args, refinement=refinements[0])
            result = scaling_sweep(base, "grid", refinements=refinements, debug=args.debug)
        payload = result.to_dict() if args.format == "json" else result.rows()
    with _sink(args.output) as out:
        out.write(render(payload, args.format))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"ibspread: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
