"""Contention-free interpolation and spreading for immersed boundary coupling."""

from .coupling import (
    ALGORITHMS,
    SpreadWorkspace,
    WorkStats,
    interpolate,
    interpolate_vector,
    spread,
    spread_buffered,
    spread_buffered_otf,
    spread_fused,
    spread_serial,
    spread_vector,
)
from .grid import ERROR, GridField, StaggeredGrid, mac_grids
from .harness import (
    BenchmarkConfig,
    ConfigError,
    TimingReport,
    hookean_force,
    run_benchmark,
    scaling_sweep,
    scatter_points,
    shear_field,
)
from .kernel import CosineKernel, Kernel, all_shifts, delta_weight, shift
from .primitives import count_unique, key_value_sort, segmented_reduce

__all__ = [
    "ALGORITHMS", "BenchmarkConfig", "ConfigError", "CosineKernel", "ERROR", "GridField",
    "Kernel", "SpreadWorkspace", "StaggeredGrid", "TimingReport", "WorkStats", "all_shifts",
    "count_unique", "delta_weight", "hookean_force", "interpolate", "interpolate_vector",
    "key_value_sort", "mac_grids", "run_benchmark", "scaling_sweep", "scatter_points",
    "segmented_reduce", "shear_field", "shift", "spread", "spread_buffered",
    "spread_buffered_otf", "spread_fused", "spread_serial", "spread_vector",
]
