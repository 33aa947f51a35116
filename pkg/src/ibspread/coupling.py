"""Interpolation and spreading between Lagrangian points and staggered grids.

Interpolation parallelizes over points: each point owns its output slot.
Spreading avoids write contention by grouping points that share a grid cell.
Points are keyed by cell and stably sorted once per call; then, for each shift,
per-point weights are gathered through the permutation, summed per cell with a
segmented reduce, and written once per inhabited cell. The buffered variants
handle ``b`` shifts per sweep and write each shift of a sweep into its own
grid-sized buffer.

Spread inputs are pre-weighted Lagrangian values (force times quadrature
weight). Interpolation applies the grid quadrature weight ``h**d`` itself, so
``h**d * <spread(G), e> == <G, interpolate(e)>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np
from numba import njit

from ._intrinsics import prefetch_write
from ._parallel import check_workers, run_blocks
from .grid import ERROR, GridField, StaggeredGrid, _cell_axis, _key, _key_inverse
from .kernel import CosineKernel, Kernel, shift_table
from .primitives import key_value_sort, reduce_segments, segment_starts

ALGORITHMS = ("serial", "fused", "buffered", "otf")
DEFAULT_SWEEP_WIDTH = 8
PREFETCH_DISTANCE = 32  # runs ahead; on fine grids every write misses cache


@dataclass
class WorkStats:
    """Operation counters filled in by the coupling routines when passed ``stats=``."""

    kernel_evals: int = 0
    writes: int = 0
    runs: int = 0

    def reset(self):
        self.kernel_evals = self.writes = self.runs = 0


def _build_loops(d):
    """Compile the point/shift loops with the dimension fixed so axis loops unroll."""

    @njit(cache=True, nogil=True, inline="always")
    def locate(X, p, origin, h, alpha, odd, cell, t):
        # t = (X - point_of(cell)) / h
        for a in range(d):
            c = _cell_axis(X[p, a], origin[a], h, alpha[a], odd)
            cell[a] = c
            t[a] = (X[p, a] - (h * (c + alpha[a]) + origin[a])) / h

    @njit(cache=True, nogil=True, inline="always")
    def weight(phi, t, shifts, j, h):
        w = 1.0
        for a in range(d):
            w *= phi(shifts[j, a] - t[a]) / h
        return w

    @njit(cache=True, nogil=True, inline="always")
    def axis_offsets(cell, s, extents, periodic, offs):
        # flat-index contribution of cell + sigma per axis, -1 where # is ERROR
        half = s // 2
        stride = np.int64(1)
        for a in range(d):
            n = extents[a]
            for k in range(s):
                i = cell[a] + k - half
                if periodic[a]:
                    i = i % n
                    if i < 0:
                        i += n
                    offs[a, k] = i * stride
                elif 0 <= i < n:
                    offs[a, k] = i * stride
                else:
                    offs[a, k] = -1
            stride *= n

    @njit(cache=True, nogil=True, inline="always")
    def target(offs, shifts, j, half):
        # no early return: it blocks unrolling of the axis loop
        k = np.int64(0)
        bad = False
        for a in range(d):
            o = offs[a, shifts[j, a] + half]
            bad |= o < 0
            k += o
        return ERROR if bad else k

    @njit(cache=True, nogil=True)
    def interp_block(lo, hi, w, order, X, e, out, evals, phi, s, shifts, h, origin, alpha,
                     extents, periodic, hd):
        cell = np.empty(d, np.int64)
        t = np.empty(d)
        offs = np.empty((d, s), np.int64)
        odd = s % 2 == 1
        half = s // 2
        count = 0
        for i in range(lo, hi):
            p = order[i]
            locate(X, p, origin, h, alpha, odd, cell, t)
            axis_offsets(cell, s, extents, periodic, offs)
            v = 0.0
            for j in range(shifts.shape[0]):
                wt = weight(phi, t, shifts, j, h)
                count += 1
                k = target(offs, shifts, j, half)
                if k != ERROR:
                    v += wt * e[k]
            out[p] = v * hd
        evals[w] = count

    @njit(cache=True, nogil=True)
    def spread_serial(X, L, ell, phi, s, shifts, h, origin, alpha, extents, periodic):
        cell = np.empty(d, np.int64)
        t = np.empty(d)
        offs = np.empty((d, s), np.int64)
        odd = s % 2 == 1
        half = s // 2
        evals = 0
        writes = 0
        for p in range(X.shape[0]):
            locate(X, p, origin, h, alpha, odd, cell, t)
            axis_offsets(cell, s, extents, periodic, offs)
            for j in range(shifts.shape[0]):
                wt = weight(phi, t, shifts, j, h)
                evals += 1
                k = target(offs, shifts, j, half)
                if k != ERROR:
                    ell[k] += wt * L[p]
                    writes += 1
        return evals, writes

    @njit(cache=True, nogil=True)
    def keys_block(lo, hi, w, X, keys, perm, bad, s, h, origin, alpha, extents, periodic):
        cell = np.empty(d, np.int64)
        odd = s % 2 == 1
        nbad = 0
        for p in range(lo, hi):
            ok = True
            for a in range(d):
                c = _cell_axis(X[p, a], origin[a], h, alpha[a], odd)
                if periodic[a]:
                    c = c % extents[a]
                    if c < 0:
                        c += extents[a]
                elif c < -1 or c > extents[a]:
                    ok = False
                cell[a] = c
            if ok:
                keys[p] = _key(cell, extents)
            else:
                keys[p] = 0
                nbad += 1
            perm[p] = p
        bad[w] = nbad

    @njit(cache=True, nogil=True)
    def order_keys_block(lo, hi, w, X, keys, perm, s, h, origin, alpha, extents, periodic):
        # like keys_block, but clamps instead of rejecting; only locality matters here
        cell = np.empty(d, np.int64)
        odd = s % 2 == 1
        for p in range(lo, hi):
            for a in range(d):
                c = _cell_axis(X[p, a], origin[a], h, alpha[a], odd)
                if periodic[a]:
                    c = c % extents[a]
                    if c < 0:
                        c += extents[a]
                else:
                    c = min(max(c, -1), extents[a])
                cell[a] = c
            keys[p] = _key(cell, extents)
            perm[p] = p

    @njit(cache=True, nogil=True, inline="always")
    def shifted_index(cells, r, shifts, j, extents, periodic):
        # grid index of cell + shift j; cell is already wrapped on periodic axes
        k = np.int64(0)
        stride = np.int64(1)
        bad = False
        for a in range(d):
            i = cells[r, a] + shifts[j, a]
            n = extents[a]
            if i < 0 or i >= n:
                bad |= not periodic[a]
                i %= n
            k += i * stride
            stride *= n
        return ERROR if bad else k

    @njit(cache=True, nogil=True)
    def sorted_offsets_block(lo, hi, w, X, perm, T, s, h, origin, alpha):
        cell = np.empty(d, np.int64)
        t = np.empty(d)
        odd = s % 2 == 1
        for i in range(lo, hi):
            locate(X, perm[i], origin, h, alpha, odd, cell, t)
            for a in range(d):
                T[i, a] = t[a]

    @njit(cache=True, nogil=True)
    def run_cells_block(lo, hi, w, run_keys, extents, lo_shift, hi_shift, cells, base):
        # base[r] is the flat index of the run's cell when every shift stays inside the
        # grid without wrapping, else -1
        for r in range(lo, hi):
            _key_inverse(run_keys[r], extents, cells[r])
            k = np.int64(0)
            stride = np.int64(1)
            inside = True
            for a in range(d):
                c = cells[r, a]
                inside &= (c + lo_shift >= 0) & (c + hi_shift < extents[a])
                k += c * stride
                stride *= extents[a]
            base[r] = k if inside else -1

    @njit(cache=True, nogil=True)
    def values_block(lo, hi, w, T, L, perm, V, j_start, width, evals, phi, shifts, h):
        t = np.empty(d)
        count = 0
        for i in range(lo, hi):
            for a in range(d):
                t[a] = T[i, a]
            lp = L[perm[i]]
            for k in range(width):
                V[i, k] = weight(phi, t, shifts, j_start + k, h) * lp
                count += 1
        evals[w] = count

    @njit(cache=True, nogil=True)
    def write_block(lo, hi, w, cells, base, sums, j_start, width, ell, writes, shifts,
                    extents, periodic):
        delta = np.zeros(width, np.int64)
        for k in range(width):
            stride = np.int64(1)
            for a in range(d):
                delta[k] += shifts[j_start + k, a] * stride
                stride *= extents[a]
        count = 0
        for r in range(lo, hi):
            ahead = r + PREFETCH_DISTANCE
            if ahead < hi and base[ahead] >= 0:
                for k in range(width):
                    prefetch_write(ell, k, base[ahead] + delta[k])
            if base[r] >= 0:
                for k in range(width):
                    ell[k, base[r] + delta[k]] += sums[r, k]
                count += width
                continue
            for k in range(width):
                m = shifted_index(cells, r, shifts, j_start + k, extents, periodic)
                if m != ERROR:
                    ell[k, m] += sums[r, k]
                    count += 1
        writes[w] = count

    return SimpleNamespace(
        interp_block=interp_block, spread_serial=spread_serial, keys_block=keys_block,
        order_keys_block=order_keys_block, sorted_offsets_block=sorted_offsets_block,
        run_cells_block=run_cells_block,
        values_block=values_block, write_block=write_block,
    )


_LOOPS = {d: _build_loops(d) for d in (1, 2, 3)}


@njit(cache=True, nogil=True)
def _sum_buffers_block(lo, hi, w, buffers, nbuf, out):
    # buffers are re-zeroed as they are consumed
    for m in range(lo, hi):
        v = 0.0
        for k in range(nbuf):
            v += buffers[k, m]
            buffers[k, m] = 0.0
        out[m] = v


def _as_points(points, d: int) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1 and d == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"points must have shape (n, {d}), got {np.shape(points)}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    return np.ascontiguousarray(X)


def _as_values(values, n: int) -> np.ndarray:
    L = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    if L.shape[0] != n:
        raise ValueError(f"got {L.shape[0]} values for {n} points")
    return L


def _grid_args(grid: StaggeredGrid):
    pk = grid._packed
    return grid.spacing, pk["origin"], pk["alpha"], pk["extents"], pk["periodic"]


def _record(stats, evals=0, writes=0, runs=0):
    if stats is not None:
        stats.kernel_evals += int(evals)
        stats.writes += int(writes)
        stats.runs += int(runs)


def _cell_order(X, grid, kernel, workers):
    """Permutation visiting points cell by cell, so gathered grid values stay cache resident."""
    h, origin, alpha, extents, periodic = _grid_args(grid)
    n = X.shape[0]
    keys = np.empty(n, dtype=np.uint32)
    order = np.empty(n, dtype=np.int64)
    run_blocks(_LOOPS[grid.dim].order_keys_block, n, workers, X, keys, order, kernel.support,
               h, origin, alpha, extents, periodic)
    return key_value_sort(keys, order, workers)[1]


def _interpolate(field, X, kernel, workers, stats, order):
    grid = field.grid
    h, origin, alpha, extents, periodic = _grid_args(grid)
    n = X.shape[0]
    out = np.empty(n)
    evals = np.zeros(workers, dtype=np.int64)
    run_blocks(_LOOPS[grid.dim].interp_block, n, workers, order, X, field.values, out, evals,
               kernel.phi, kernel.support, shift_table(kernel.support, grid.dim),
               h, origin, alpha, extents, periodic, h**grid.dim)
    _record(stats, evals=evals.sum(), writes=n)
    return out


def interpolate(field: GridField, points, kernel: Kernel | None = None, workers: int = 1,
                stats: WorkStats | None = None) -> np.ndarray:
    """Values of a grid field at each point, ``E_i = sum_k delta_h(x_k - X_i) e_k h**d``."""
    kernel = kernel or CosineKernel()
    workers = check_workers(workers)
    X = _as_points(points, field.grid.dim)
    order = _cell_order(X, field.grid, kernel, workers)
    return _interpolate(field, X, kernel, workers, stats, order)


def spread_serial(points, values, grid: StaggeredGrid, kernel: Kernel | None = None,
                  stats: WorkStats | None = None) -> GridField:
    """Single-threaded reference spread; the oracle for the parallel variants."""
    kernel = kernel or CosineKernel()
    X = _as_points(points, grid.dim)
    L = _as_values(values, X.shape[0])
    h, origin, alpha, extents, periodic = _grid_args(grid)
    ell = np.zeros(grid.size)
    evals, writes = _LOOPS[grid.dim].spread_serial(X, L, ell, kernel.phi, kernel.support,
                                   shift_table(kernel.support, grid.dim),
                                   h, origin, alpha, extents, periodic)
    _record(stats, evals=evals, writes=writes)
    return GridField(grid, ell)


class SpreadWorkspace:
    """Reusable buffers for the sort-based spreads.

    Array sizes follow the most recent call; ``sweep_width`` grid-sized buffers
    are only allocated when ``buffered`` is true. Not safe to share between
    concurrent spread calls.
    """

    def __init__(self, sweep_width: int = DEFAULT_SWEEP_WIDTH, buffered: bool = False,
                 grid: StaggeredGrid | None = None):
        if sweep_width < 1:
            raise ValueError("sweep width must be >= 1")
        self.sweep_width = int(sweep_width)
        self.buffered = buffered
        self.keys = np.empty(0, dtype=np.uint32)
        self.permutation = np.empty(0, dtype=np.int64)
        self.sorted_keys = self.keys
        self.starts = np.zeros(1, dtype=np.int64)
        self.staging = np.empty((0, self.sweep_width))
        self.offsets = np.empty((0, 0))
        self.run_cells = np.empty((0, 0), dtype=np.int64)
        self.run_base = np.empty(0, dtype=np.int64)
        self.q = 0
        self.buffer = None
        self._dirty = False
        if buffered and grid is not None:
            self._ensure_buffer(grid)

    def _ensure_buffer(self, grid: StaggeredGrid):
        shape = (self.sweep_width, grid.size)
        if self.buffer is None or self.buffer.shape != shape:
            self.buffer = np.zeros(shape)
            self._dirty = False
        elif self._dirty:
            self.buffer[:] = 0.0
            self._dirty = False

    def _ensure_points(self, n: int, width: int, d: int):
        if self.keys.shape[0] != n:
            self.keys = np.empty(n, dtype=np.uint32)
            self.permutation = np.empty(n, dtype=np.int64)
        if self.offsets.shape != (n, d):
            self.offsets = np.empty((n, d))
        if self.staging.shape != (n, width):
            self.staging = np.empty((n, width))


def _prepare(X, grid, kernel, ws, workers):
    """Keys, stable permutation, run boundaries, run cells and sorted offsets."""
    h, origin, alpha, extents, periodic = _grid_args(grid)
    loops = _LOOPS[grid.dim]
    n = X.shape[0]
    bad = np.zeros(workers, dtype=np.int64)
    run_blocks(loops.keys_block, n, workers, X, ws.keys, ws.permutation, bad,
               kernel.support, h, origin, alpha, extents, periodic)
    if bad.sum():
        raise ValueError(
            f"{int(bad.sum())} points lie outside the extended grid on a non-periodic axis"
        )
    ws.sorted_keys, ws.permutation = key_value_sort(ws.keys, ws.permutation, workers)
    ws.starts = segment_starts(ws.sorted_keys, workers)
    ws.q = ws.starts.shape[0] - 1
    # the cell of a run and the offset of a point do not change between shifts
    shifts = shift_table(kernel.support, grid.dim)
    ws.run_cells = np.empty((ws.q, grid.dim), dtype=np.int64)
    ws.run_base = np.empty(ws.q, dtype=np.int64)
    run_blocks(loops.run_cells_block, ws.q, workers, ws.sorted_keys[ws.starts[:-1]],
               extents, shifts.min(), shifts.max(), ws.run_cells, ws.run_base)
    run_blocks(loops.sorted_offsets_block, n, workers, X, ws.permutation, ws.offsets,
               kernel.support, h, origin, alpha)


def _sweeps(X, L, grid, kernel, ws, workers, width, out2d, stats):
    """Run all shifts, ``width`` per sweep, accumulating column k into ``out2d[k]``."""
    h, _, _, extents, periodic = _grid_args(grid)
    shifts = shift_table(kernel.support, grid.dim)
    nshift = shifts.shape[0]
    loops = _LOOPS[grid.dim]
    n = X.shape[0]
    _prepare(X, grid, kernel, ws, workers)
    q = ws.q
    sums = np.empty((q, width))
    evals = np.zeros(workers, dtype=np.int64)
    writes = np.zeros(workers, dtype=np.int64)
    total_evals = total_writes = 0
    for j_start in range(0, nshift, width):
        wj = min(width, nshift - j_start)
        V = ws.staging[:, :wj] if wj < width else ws.staging
        run_blocks(loops.values_block, n, workers, ws.offsets, L, ws.permutation, V,
                   j_start, wj, evals, kernel.phi, shifts, h)
        total_evals += evals.sum()
        S = sums[:, :wj] if wj < width else sums
        reduce_segments(ws.starts, V, S, workers)
        run_blocks(loops.write_block, q, workers, ws.run_cells, ws.run_base, S, j_start, wj, out2d, writes,
                   shifts, extents, periodic)
        total_writes += writes.sum()
    _record(stats, evals=total_evals, writes=total_writes, runs=q)


def spread_fused(points, values, grid: StaggeredGrid, kernel: Kernel | None = None,
                 workspace: SpreadWorkspace | None = None, workers: int = 1,
                 stats: WorkStats | None = None) -> GridField:
    """Sort/segmented-reduce spread, one synchronization round per shift."""
    kernel = kernel or CosineKernel()
    workers = check_workers(workers)
    X = _as_points(points, grid.dim)
    L = _as_values(values, X.shape[0])
    ws = workspace or SpreadWorkspace(sweep_width=1)
    ws._ensure_points(X.shape[0], 1, grid.dim)
    ell = np.zeros(grid.size)
    if X.shape[0]:
        _sweeps(X, L, grid, kernel, ws, workers, 1, ell[None, :], stats)
    return GridField(grid, ell)


def spread_buffered(points, values, grid: StaggeredGrid, kernel: Kernel | None = None,
                    workspace: SpreadWorkspace | None = None, workers: int = 1,
                    stats: WorkStats | None = None) -> GridField:
    """Spread ``b`` shifts per sweep into ``b`` pre-allocated buffers, then sum them.

    ``b`` is the workspace's sweep width. The workspace buffers are left zeroed
    on return.
    """
    kernel = kernel or CosineKernel()
    workers = check_workers(workers)
    X = _as_points(points, grid.dim)
    L = _as_values(values, X.shape[0])
    ws = workspace or SpreadWorkspace(sweep_width=DEFAULT_SWEEP_WIDTH, buffered=True)
    b = ws.sweep_width
    ws._ensure_buffer(grid)
    ws._ensure_points(X.shape[0], b, grid.dim)
    out = np.empty(grid.size)
    ws._dirty = True
    if X.shape[0]:
        _sweeps(X, L, grid, kernel, ws, workers, b, ws.buffer, stats)
    nbuf = min(b, kernel.support**grid.dim)
    run_blocks(_sum_buffers_block, grid.size, workers, ws.buffer, nbuf, out)
    ws._dirty = False
    return GridField(grid, out)


def spread_buffered_otf(points, values, grid: StaggeredGrid, kernel: Kernel | None = None,
                        sweep_width: int = DEFAULT_SWEEP_WIDTH, workers: int = 1,
                        stats: WorkStats | None = None) -> GridField:
    """Buffered spread whose buffers live only for the duration of the call."""
    ws = SpreadWorkspace(sweep_width=sweep_width, buffered=True, grid=grid)
    try:
        return spread_buffered(points, values, grid, kernel, ws, workers, stats)
    finally:
        ws.buffer = None


def spread(points, values, grid: StaggeredGrid, kernel: Kernel | None = None,
           algorithm: str = "fused", workers: int = 1,
           sweep_width: int = DEFAULT_SWEEP_WIDTH, workspace: SpreadWorkspace | None = None,
           stats: WorkStats | None = None) -> GridField:
    """Dispatch to one of the spreading algorithms by name."""
    if algorithm == "serial":
        return spread_serial(points, values, grid, kernel, stats=stats)
    if algorithm == "fused":
        return spread_fused(points, values, grid, kernel, workspace, workers, stats)
    if algorithm == "buffered":
        if workspace is None:
            workspace = SpreadWorkspace(sweep_width, buffered=True, grid=grid)
        return spread_buffered(points, values, grid, kernel, workspace, workers, stats)
    if algorithm == "otf":
        return spread_buffered_otf(points, values, grid, kernel, sweep_width, workers, stats)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def interpolate_vector(fields, points, kernel: Kernel | None = None, workers: int = 1,
                       stats: WorkStats | None = None) -> np.ndarray:
    """Interpolate each component field; returns shape ``(n, len(fields))``."""
    fields = list(fields)
    if not fields:
        raise ValueError("need at least one component field")
    d = fields[0].grid.dim
    if len(fields) != d:
        raise ValueError(f"{len(fields)} component fields for a {d}-dimensional grid")
    kernel = kernel or CosineKernel()
    workers = check_workers(workers)
    X = _as_points(points, d)
    # one visiting order serves every component; staggering only shifts cells by one
    order = _cell_order(X, fields[0].grid, kernel, workers)
    cols = [_interpolate(f, X, kernel, workers, stats, order) for f in fields]
    return np.stack(cols, axis=-1)


def spread_vector(points, values, grids, kernel: Kernel | None = None,
                  algorithm: str = "fused", workers: int = 1,
                  sweep_width: int = DEFAULT_SWEEP_WIDTH, workspaces=None,
                  stats: WorkStats | None = None) -> list[GridField]:
    """Spread each column of ``values`` (shape ``(n, d)``) onto its component grid."""
    grids = list(grids)
    d = grids[0].dim if grids else 0
    values = np.asarray(values, dtype=np.float64)
    if len(grids) != d or values.ndim != 2 or values.shape[1] != d:
        raise ValueError(
            f"need one grid and one value column per component; got {len(grids)} grids, "
            f"values of shape {values.shape} for dimension {d}"
        )
    if workspaces is None:
        workspaces = [None] * d
    return [
        spread(points, values[:, c], g, kernel, algorithm, workers, sweep_width,
               workspaces[c], stats)
        for c, g in enumerate(grids)
    ]
