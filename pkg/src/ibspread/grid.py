"""Staggered Eulerian grids.

A component grid holds the points ``x = origin + h * (i + alpha)`` for integer
``i`` in ``[0, extent)`` on every axis. Flat indices are colexicographic (axis 0
fastest). Sort keys live on the extended grid, which adds one ghost layer on
each side of every axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

ERROR = np.iinfo(np.int64).max
KEY_MAX = np.iinfo(np.uint32).max  # reserved, never produced by key()


@njit(cache=True, nogil=True, inline="always")
def _cell_axis(x, origin, h, alpha, odd):
    t = (x - origin) / h - alpha
    if odd:
        return np.int64(np.ceil(t - 0.5))
    return np.int64(np.ceil(t))


@njit(cache=True, nogil=True, inline="always")
def _wrap_axis(i, n, periodic):
    if periodic:
        i = i % n
        if i < 0:
            i += n
        return i, True
    return i, 0 <= i < n


@njit(cache=True, nogil=True)
def _grid_index(cell, extents, periodic):
    k = np.int64(0)
    stride = np.int64(1)
    for a in range(extents.shape[0]):
        i, ok = _wrap_axis(cell[a], extents[a], periodic[a])
        if not ok:
            return ERROR
        k += i * stride
        stride *= extents[a]
    return k


@njit(cache=True, nogil=True)
def _key(cell, extents):
    k = np.int64(0)
    stride = np.int64(1)
    for a in range(extents.shape[0]):
        k += (cell[a] + 1) * stride
        stride *= extents[a] + 2
    return np.uint32(k)


@njit(cache=True, nogil=True)
def _key_inverse(key, extents, out):
    k = np.int64(key)
    for a in range(extents.shape[0]):
        e = extents[a] + 2
        out[a] = k % e - 1
        k //= e


@njit(cache=True, nogil=True)
def _in_extended(cell, extents):
    for a in range(extents.shape[0]):
        if cell[a] < -1 or cell[a] > extents[a]:
            return False
    return True


@njit(cache=True)
def _cell_index_many(X, origin, h, alpha, odd, out):
    for p in range(X.shape[0]):
        for a in range(X.shape[1]):
            out[p, a] = _cell_axis(X[p, a], origin[a], h, alpha[a], odd)


@njit(cache=True)
def _grid_index_many(cells, extents, periodic, out):
    for p in range(cells.shape[0]):
        out[p] = _grid_index(cells[p], extents, periodic)


@njit(cache=True)
def _key_many(cells, extents, out):
    for p in range(cells.shape[0]):
        out[p] = _key(cells[p], extents)


@njit(cache=True)
def _key_inverse_many(keys, extents, out):
    for p in range(keys.shape[0]):
        _key_inverse(keys[p], extents, out[p])


def _as_tuple(value, d, cast, name):
    if np.ndim(value) == 0:
        return (cast(value),) * d
    value = tuple(cast(v) for v in value)
    if len(value) != d:
        raise ValueError(f"{name} has {len(value)} entries, grid has {d} axes")
    return value


@dataclass(frozen=True)
class StaggeredGrid:
    """One component grid of a (possibly staggered) regular lattice.

    ``staggering``, ``periodic`` and ``origin`` accept either a scalar applied
    to every axis or one entry per axis.
    """

    extents: tuple[int, ...]
    spacing: float
    staggering: tuple[float, ...] = 0.0
    periodic: tuple[bool, ...] = True
    origin: tuple[float, ...] = 0.0
    _packed: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        extents = tuple(int(e) for e in np.atleast_1d(self.extents))
        d = len(extents)
        if not 1 <= d <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {d}")
        if min(extents) < 1:
            raise ValueError(f"extents must be positive, got {extents}")
        spacing = float(self.spacing)
        if not (np.isfinite(spacing) and spacing > 0):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        staggering = _as_tuple(self.staggering, d, float, "staggering")
        if any(not 0.0 <= a < 1.0 for a in staggering):
            raise ValueError(f"staggering must lie in [0, 1), got {staggering}")
        periodic = _as_tuple(self.periodic, d, bool, "periodic")
        origin = _as_tuple(self.origin, d, float, "origin")
        if int(np.prod([e + 2 for e in extents], dtype=object)) > KEY_MAX:
            raise ValueError("extended grid has more cells than 32-bit keys can label")

        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "staggering", staggering)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "_packed", {
            "extents": np.array(extents, dtype=np.int64),
            "alpha": np.array(staggering, dtype=np.float64),
            "periodic": np.array(periodic, dtype=np.bool_),
            "origin": np.array(origin, dtype=np.float64),
        })

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def size(self) -> int:
        """Number of grid points, n_omega."""
        return int(np.prod(self.extents))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extents

    def cell_index(self, X, s: int) -> np.ndarray:
        """Integer cell of each point for a kernel of support size ``s``.

        For even ``s`` the associated grid point sits at or above the point on
        every axis, ``X - point_of(i)`` in ``(-h, 0]``; for odd ``s`` it is the
        nearest grid point, ``X - point_of(i)`` in ``(-h/2, h/2]``. Accepts a
        single point or an ``(n, d)`` array.
        """
        if s < 1:
            raise ValueError("support size must be >= 1")
        X = np.asarray(X, dtype=np.float64)
        pts = np.ascontiguousarray(X.reshape(-1, self.dim))
        out = np.empty(pts.shape, dtype=np.int64)
        pk = self._packed
        _cell_index_many(pts, pk["origin"], self.spacing, pk["alpha"], s % 2 == 1, out)
        return out.reshape(X.shape)

    def point_of(self, cell) -> np.ndarray:
        cell = np.asarray(cell, dtype=np.float64)
        return self.spacing * (cell + self._packed["alpha"]) + self._packed["origin"]

    def grid_index(self, cell):
        """Flat index of each cell, or :data:`ERROR` off a non-periodic axis."""
        cells = np.asarray(cell, dtype=np.int64)
        flat = np.ascontiguousarray(cells.reshape(-1, self.dim))
        out = np.empty(flat.shape[0], dtype=np.int64)
        _grid_index_many(flat, self._packed["extents"], self._packed["periodic"], out)
        if cells.ndim == 1:
            return int(out[0])
        return out.reshape(cells.shape[:-1])

    def key(self, cell):
        cells = np.asarray(cell, dtype=np.int64)
        flat = np.ascontiguousarray(cells.reshape(-1, self.dim))
        ext = self._packed["extents"]
        if np.any(flat < -1) or np.any(flat > ext):
            raise ValueError("cell lies outside the extended grid")
        out = np.empty(flat.shape[0], dtype=np.uint32)
        _key_many(flat, ext, out)
        if cells.ndim == 1:
            return int(out[0])
        return out.reshape(cells.shape[:-1])

    def key_inverse(self, key) -> np.ndarray:
        keys = np.asarray(key, dtype=np.uint32)
        flat = np.ascontiguousarray(keys.reshape(-1))
        out = np.empty((flat.shape[0], self.dim), dtype=np.int64)
        _key_inverse_many(flat, self._packed["extents"], out)
        if keys.ndim == 0:
            return out[0]
        return out.reshape(keys.shape + (self.dim,))

    def points(self) -> np.ndarray:
        """Coordinates of all grid points in flat-index order, shape ``(n_omega, d)``."""
        axes = [np.arange(e) for e in self.extents]
        mesh = np.meshgrid(*axes, indexing="ij")
        cells = np.stack([m.ravel(order="F") for m in mesh], axis=-1)
        return self.point_of(cells)

    def zeros(self) -> "GridField":
        return GridField(self, np.zeros(self.size))


@dataclass
class GridField:
    """Values at every point of one component grid, flat colexicographic order."""

    grid: StaggeredGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.shape[0] != self.grid.size:
            raise ValueError(
                f"field has {self.values.shape[0]} values, grid has {self.grid.size} points"
            )

    def as_array(self) -> np.ndarray:
        """View with shape ``grid.extents`` (axis 0 fastest in memory)."""
        return self.values.reshape(self.grid.extents, order="F")


def mac_grids(refinement, length, dim: int = 3, periodic=True) -> list[StaggeredGrid]:
    """Component grids of a MAC lattice on a box of side ``length``.

    Component ``c`` lives on cell faces normal to axis ``c``: staggering 0 on
    that axis and 1/2 on the others. A scalar ``refinement`` applies to all
    ``dim`` axes.
    """
    if np.ndim(refinement) == 0:
        refinement = (int(refinement),) * dim
    refinement = tuple(int(r) for r in refinement)
    d = len(refinement)
    lengths = _as_tuple(length, d, float, "length")
    h = lengths[0] / refinement[0]
    if not np.allclose([L / r for L, r in zip(lengths, refinement)], h):
        raise ValueError("MAC grids need equal spacing on every axis")
    grids = []
    for c in range(d):
        alpha = tuple(0.0 if a == c else 0.5 for a in range(d))
        grids.append(StaggeredGrid(refinement, h, alpha, periodic))
    return grids
