"""Self-checks run by ``ibspread verify``.

Each check compares the parallel code paths against a simple reference
(serial loops, ``np.argsort(kind="stable")``, direct summation of the delta
kernel over every grid point) on small random instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import (
    interpolate,
    spread_buffered,
    spread_buffered_otf,
    spread_fused,
    spread_serial,
    SpreadWorkspace,
)
from .grid import GridField, StaggeredGrid
from .kernel import CosineKernel, all_shifts, shift
from .primitives import count_unique, key_value_sort, segmented_reduce


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = np.max(np.abs(b)) if b.size else 0.0
    diff = np.max(np.abs(a - b)) if a.size else 0.0
    return float(diff / scale) if scale > 0 else float(diff)


def random_grid(rng, dim=None, max_extent=16) -> StaggeredGrid:
    dim = dim or int(rng.integers(1, 4))
    extents = tuple(int(e) for e in rng.integers(4, max_extent + 1, dim))
    return StaggeredGrid(
        extents,
        spacing=float(rng.uniform(0.1, 2.0)),
        staggering=tuple(float(a) for a in rng.choice([0.0, 0.5], dim)),
        periodic=tuple(bool(p) for p in rng.integers(0, 2, dim)),
        origin=tuple(float(o) for o in rng.uniform(-1, 1, dim)),
    )


def random_points(rng, grid: StaggeredGrid, n: int) -> np.ndarray:
    # spans the box plus a margin on non-periodic axes, within the extended grid
    lo = np.array(grid.origin)
    width = grid.spacing * np.array(grid.extents, dtype=float)
    X = lo + rng.random((n, grid.dim)) * width
    for a, per in enumerate(grid.periodic):
        if not per:
            X[:, a] = lo[a] + rng.uniform(-0.9, width[a] / grid.spacing - 0.1, n) * grid.spacing
    return X


def direct_spread(points, values, grid: StaggeredGrid, kernel=None) -> np.ndarray:
    """Spread by summing ``delta_h(x_k - X)`` over every grid point, minimal image on periodic axes."""
    kernel = kernel or CosineKernel()
    xk = grid.points()
    out = np.zeros(grid.size)
    box = grid.spacing * np.array(grid.extents, dtype=float)
    per = np.array(grid.periodic)
    for X, v in zip(np.atleast_2d(points), values):
        r = xk - X
        r[:, per] -= box[per] * np.round(r[:, per] / box[per])
        out += kernel.delta_h(r, grid.spacing) * v
    return out


def _check_shifts() -> CheckResult:
    ok = (
        shift(1, 4, 3) == (-2, -2, -2)
        and shift(64, 4, 3) == (1, 1, 1)
        and shift(5, 3, 2) == (0, 0)
        and len({tuple(r) for r in all_shifts(4, 3)}) == 64
    )
    return CheckResult("shift enumeration", ok, "first/last/centre shifts and bijectivity")


def _check_partition(rng) -> CheckResult:
    k = CosineKernel()
    r = rng.random(1000)
    sums = sum(k(r - j) for j in range(-1, 3))
    err = float(np.max(np.abs(sums - 1.0)))
    return CheckResult("partition of unity", err <= 1e-13, f"max |sum - 1| = {err:.2e}")


def _check_figure3() -> CheckResult:
    keys = np.array([1, 6, 5, 3, 5], dtype=np.uint32)
    sk, perm = key_value_sort(keys, np.arange(1, 6), workers=2)
    run_keys, sums = segmented_reduce(sk, perm.astype(float), workers=2)
    ok = (perm.tolist() == [1, 4, 3, 5, 2] and sums.tolist() == [1.0, 4.0, 8.0, 2.0]
          and count_unique(sk) == 4)
    return CheckResult("sort/reduce walkthrough", ok, f"P={perm.tolist()} sums={sums.tolist()}")


def _check_primitives(rng, cases) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(0, 200))
        keys = rng.integers(0, int(rng.choice([4, 1000, 2**32 - 1])), n).astype(np.uint32)
        workers = int(rng.integers(1, 5))
        sk, perm = key_value_sort(keys, np.arange(n), workers)
        ref = np.argsort(keys, kind="stable")
        if not (np.array_equal(perm, ref) and np.array_equal(sk, keys[ref])):
            return CheckResult("primitives", False, "sort disagrees with a stable argsort")
        vals = rng.normal(size=n)
        rk, rs = segmented_reduce(sk, vals, workers)
        uk, starts = np.unique(sk, return_index=True)
        ref_sums = np.array([vals[s:e].sum() for s, e in zip(starts, list(starts[1:]) + [n])])
        if not np.array_equal(rk, uk):
            return CheckResult("primitives", False, "run keys disagree")
        worst = max(worst, rel_err(rs, ref_sums))
    return CheckResult("primitives", worst <= 1e-12, f"{cases} cases, reduce rel err {worst:.2e}")


def _check_spreads(rng, cases) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        grid = random_grid(rng)
        X = random_points(rng, grid, int(rng.integers(1, 300)))
        L = rng.normal(size=X.shape[0])
        ref = spread_serial(X, L, grid).values
        workers = int(rng.integers(1, 5))
        b = int(rng.choice([1, 4, 8, 64]))
        outs = [
            spread_fused(X, L, grid, workers=workers),
            spread_buffered(X, L, grid, workspace=SpreadWorkspace(b, buffered=True),
                            workers=workers),
            spread_buffered_otf(X, L, grid, sweep_width=b, workers=workers),
        ]
        for out in outs:
            worst = max(worst, rel_err(out.values, ref))
    return CheckResult("spread oracle", worst <= 1e-12, f"{cases} cases, rel err {worst:.2e}")


def _check_direct(rng, cases) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        grid = random_grid(rng, max_extent=8)
        X = random_points(rng, grid, 20)
        L = rng.normal(size=20)
        worst = max(worst, rel_err(spread_serial(X, L, grid).values, direct_spread(X, L, grid)))
    return CheckResult("serial spread vs direct sum", worst <= 1e-12,
                       f"{cases} cases, rel err {worst:.2e}")


def _check_adjoint(rng, cases) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        grid = random_grid(rng)
        X = random_points(rng, grid, 100)
        G = rng.normal(size=100)
        e = GridField(grid, rng.normal(size=grid.size))
        lhs = grid.spacing**grid.dim * np.dot(spread_fused(X, G, grid, workers=2).values, e.values)
        rhs = np.dot(G, interpolate(e, X, workers=3))
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return CheckResult("adjointness", worst <= 1e-12, f"{cases} cases, rel err {worst:.2e}")


def _check_interp_workers(rng, cases) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        grid = random_grid(rng)
        X = random_points(rng, grid, 200)
        e = GridField(grid, rng.normal(size=grid.size))
        worst = max(worst, rel_err(interpolate(e, X, workers=4), interpolate(e, X, workers=1)))
    return CheckResult("parallel interpolate", worst <= 1e-12, f"{cases} cases, rel err {worst:.2e}")


def run_checks(seed: int = 0, cases: int = 20) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        _check_shifts(),
        _check_partition(rng),
        _check_figure3(),
        _check_primitives(rng, cases * 10),
        _check_direct(rng, max(1, cases // 4)),
        _check_spreads(rng, cases),
        _check_adjoint(rng, cases),
        _check_interp_workers(rng, cases),
    ]
