"""Tethered points in a fixed shear flow: the interpolate/spread benchmark.

Units are CGS throughout (cm, s, dyn). Configuration takes the domain edge and
time step in micrometres and microseconds and converts on access.

Each step:

    U*      = interpolate(u, X)          timed
    X*      = X + k U*
    F       = -kappa (X* - X0)           minimal image on the periodic box
    ell     = spread(F, X*)              timed, kept but never used
    U       = interpolate(u, X)          timed
    X       = X + k U

The velocity field is held fixed, so the second interpolation repeats the
first; ``debug=True`` asserts that it does.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .coupling import (
    ALGORITHMS,
    DEFAULT_SWEEP_WIDTH,
    SpreadWorkspace,
    interpolate_vector,
    spread_vector,
)
from .grid import GridField, mac_grids
from .kernel import CosineKernel

UM = 1e-4  # cm
US = 1e-6  # s

CSV_COLUMNS = (
    "algorithm", "refinement", "n_points", "workers", "sweep_width",
    "operation", "calls", "mean_s", "min_s", "max_s", "seed",
)
OPERATIONS = ("interpolate", "spread")


class ConfigError(ValueError):
    """Invalid benchmark configuration."""


@dataclass(frozen=True)
class BenchmarkConfig:
    length_um: float = 16.0
    refinement: int = 64
    n_points: int = 2**16
    shear_rate: float = 1000.0  # 1/s
    spring_constant: float = 0.01  # dyn/cm
    dt_us: float = 0.1
    steps: int = 100
    workers: int = 1
    algorithm: str = "fused"
    sweep_width: int = DEFAULT_SWEEP_WIDTH
    seed: int = 0

    @property
    def length(self) -> float:
        return self.length_um * UM

    @property
    def dt(self) -> float:
        return self.dt_us * US

    def validate(self) -> "BenchmarkConfig":
        s = CosineKernel.support
        problems = []
        if not (np.isfinite(self.length_um) and self.length_um > 0):
            problems.append(f"domain length must be positive, got {self.length_um}")
        if self.refinement < s:
            problems.append(f"refinement must be at least the kernel support {s}, "
                            f"got {self.refinement}")
        if self.n_points < 0:
            problems.append(f"point count must be non-negative, got {self.n_points}")
        for name in ("shear_rate", "spring_constant", "dt_us"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                problems.append(f"{name} must be finite and non-negative, got {v}")
        for name in ("steps", "workers", "sweep_width"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.algorithm not in ALGORITHMS:
            problems.append(f"algorithm must be one of {', '.join(ALGORITHMS)}, "
                            f"got {self.algorithm!r}")
        if problems:
            raise ConfigError("; ".join(problems))
        return self


@dataclass
class TimingReport:
    config: BenchmarkConfig
    samples: dict[str, list[float]] = field(
        default_factory=lambda: {op: [] for op in OPERATIONS})
    positions: np.ndarray | None = None
    forces: np.ndarray | None = None

    def calls(self, op: str) -> int:
        return len(self.samples[op])

    def mean(self, op: str) -> float:
        return float(np.mean(self.samples[op])) if self.samples[op] else float("nan")

    def min(self, op: str) -> float:
        return float(np.min(self.samples[op])) if self.samples[op] else float("nan")

    def max(self, op: str) -> float:
        return float(np.max(self.samples[op])) if self.samples[op] else float("nan")

    def physics_digest(self) -> str:
        """SHA-256 of the final positions and last forces; timings never enter it."""
        h = hashlib.sha256()
        for arr in (self.positions, self.forces):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()

    def rows(self) -> list[dict]:
        c = self.config
        return [
            {
                "algorithm": c.algorithm,
                "refinement": c.refinement,
                "n_points": c.n_points,
                "workers": c.workers,
                "sweep_width": c.sweep_width,
                "operation": op,
                "calls": self.calls(op),
                "mean_s": self.mean(op),
                "min_s": self.min(op),
                "max_s": self.max(op),
                "seed": c.seed,
            }
            for op in OPERATIONS
        ]

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "rows": self.rows(),
            "samples": self.samples,
            "physics_digest": self.physics_digest(),
        }


def shear_field(grids, shear_rate: float, length: float) -> list[GridField]:
    """MAC velocity ``u = (0, 0, shear_rate * (y - length / 2))``."""
    grids = list(grids)
    if len(grids) != 3 or any(g.dim != 3 for g in grids):
        raise ValueError("shear field needs three 3-D component grids")
    fields = [g.zeros() for g in grids]
    y = grids[2].points()[:, 1]
    fields[2].values[:] = shear_rate * (y - 0.5 * length)
    return fields


def point_rng(seed: int) -> np.random.Generator:
    # stream 0 of the seed is reserved for point placement
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0,))))


def scatter_points(n: int, length: float, seed: int):
    """``n`` points uniform on ``[0, length)**3``; returns ``(points, anchors)``."""
    if n < 0:
        raise ValueError(f"point count must be non-negative, got {n}")
    X = point_rng(seed).random((n, 3)) * length
    return X, X.copy()


def hookean_force(predicted, anchors, spring_constant: float, length: float) -> np.ndarray:
    predicted = np.asarray(predicted, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    if predicted.shape != anchors.shape:
        raise ValueError("predicted positions and anchors differ in shape")
    disp = predicted - anchors
    disp -= length * np.round(disp / length)
    return -spring_constant * disp


def _timed(samples, fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    samples.append(time.perf_counter() - t)
    return out


def run_benchmark(config: BenchmarkConfig, debug: bool = False, warmup: bool = True,
                  stats=None) -> TimingReport:
    """Run ``config.steps`` steps and collect per-call wall times."""
    config.validate()
    c = config
    grids = mac_grids(c.refinement, c.length)
    u = shear_field(grids, c.shear_rate, c.length)
    X, X0 = scatter_points(c.n_points, c.length, c.seed)
    workspaces = None
    if c.algorithm in ("fused", "buffered"):
        workspaces = [SpreadWorkspace(c.sweep_width, buffered=c.algorithm == "buffered", grid=g)
                      for g in grids]
    spread_kw = dict(algorithm=c.algorithm, workers=c.workers, sweep_width=c.sweep_width,
                     workspaces=workspaces)

    if warmup:
        # compile and size workspaces outside the timed loop
        interpolate_vector(u, X, workers=c.workers)
        spread_vector(X, np.zeros_like(X), grids, **spread_kw)

    report = TimingReport(c)
    interp_t, spread_t = report.samples["interpolate"], report.samples["spread"]
    F = np.zeros_like(X)
    for _ in range(c.steps):
        U_star = _timed(interp_t, interpolate_vector, u, X, workers=c.workers, stats=stats)
        X_star = X + c.dt * U_star
        F = hookean_force(X_star, X0, c.spring_constant, c.length)
        _timed(spread_t, spread_vector, X_star, F, grids, stats=stats, **spread_kw)
        U = _timed(interp_t, interpolate_vector, u, X, workers=c.workers, stats=stats)
        if debug and not np.array_equal(U, U_star):
            raise AssertionError("second interpolation differs from the first in a fixed flow")
        X = X + c.dt * U
    report.positions = X
    report.forces = F
    return report


@dataclass
class SweepResult:
    mode: str
    reports: list[TimingReport]

    def rows(self) -> list[dict]:
        return [row for r in self.reports for row in r.rows()]

    def speedup(self, op: str) -> list[float]:
        """Mean time of the first configuration over each configuration's mean time."""
        if not self.reports:
            return []
        base = self.reports[0].mean(op)
        return [base / r.mean(op) for r in self.reports]

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "reports": [r.to_dict() for r in self.reports]}
        if self.mode == "strong":
            out["speedup"] = {op: self.speedup(op) for op in OPERATIONS}
        return out


def scaling_sweep(base: BenchmarkConfig, mode: str, workers=(1, 2, 4, 8),
                  pairs=None, refinements=(16, 32, 64, 128), **kwargs) -> SweepResult:
    """Run configurations one after another.

    ``strong`` varies ``workers`` at fixed size, ``weak`` walks ``pairs`` of
    ``(n_points, workers)`` (default: base size and workers doubling three
    times), ``grid`` varies ``refinements`` at fixed size.
    """
    if mode == "strong":
        configs = [replace(base, workers=p) for p in workers]
    elif mode == "weak":
        if pairs is None:
            pairs = [(base.n_points * 2**i, base.workers * 2**i) for i in range(3)]
        configs = [replace(base, n_points=n, workers=p) for n, p in pairs]
    elif mode == "grid":
        configs = [replace(base, refinement=r) for r in refinements]
    else:
        raise ValueError(f"unknown sweep mode {mode!r}; expected strong, weak or grid")
    for cfg in configs:
        cfg.validate()
    return SweepResult(mode, [run_benchmark(cfg, **kwargs) for cfg in configs])


def write_csv(rows, stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_json(payload, stream) -> None:
    json.dump(payload, stream, indent=2)
    stream.write("\n")


def render(rows_or_payload, fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        write_csv(rows_or_payload, buf)
    elif fmt == "json":
        write_json(rows_or_payload, buf)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return buf.getvalue()
