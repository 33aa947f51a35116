"""Regularized delta kernels and support shifts."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from functools import lru_cache

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def cosine_phi(r):
    """1-D cosine kernel, ``(1 + cos(pi r / 2)) / 4`` on ``|r| < 2``."""
    if abs(r) >= 2.0:
        return 0.0
    # cos(pi r / 2) as cos(4 theta), theta = pi r / 8. |theta| < pi / 4 keeps libm on its
    # short, well-predicted path, about 2.5x faster when r jumps between branches;
    # agrees with the direct form to a few ulp
    c = math.cos(0.125 * math.pi * r)
    c2 = c * c
    return 0.5 + 2.0 * c2 * (c2 - 1.0)


@njit(cache=True, nogil=True, inline="always")
def _shift_into(j0, s, out):
    # j0 is 0-based; colexicographic, axis 0 fastest
    half = s // 2
    for a in range(out.shape[0]):
        out[a] = j0 % s - half
        j0 //= s


@njit(cache=True, nogil=True, inline="always")
def _delta_weight(phi, dx, sigma, h):
    w = 1.0
    for a in range(dx.shape[0]):
        w *= phi(sigma[a] - dx[a] / h) / h
    return w


def support_size(radius: float, samples: int = 1000) -> int:
    """Support size in unit intervals of a kernel supported on ``[-radius, radius]``.

    The largest number of integers covered by the shifted support
    ``[r - radius, r + radius]`` over ``r`` in ``[0, 1)``, minus one.
    """
    best = 0
    for r in np.arange(samples) / samples:
        best = max(best, math.floor(r + radius) - math.ceil(r - radius) + 1)
    return best - 1


class Kernel(ABC):
    """A compactly supported 1-D kernel ``phi``; ``delta_h`` is its scaled tensor product.

    Subclasses provide :attr:`phi` as a numba-compiled scalar function so the
    coupling loops can call it without leaving nopython mode.
    """

    radius: float
    support: int

    @property
    @abstractmethod
    def phi(self):
        ...

    def __call__(self, r):
        r = np.asarray(r, dtype=np.float64)
        return np.vectorize(self.phi, otypes=[np.float64])(r)

    def delta_h(self, x, h: float):
        """``prod_i phi(x_i / h) / h`` for displacement vectors ``x`` of shape ``(..., d)``."""
        x = np.asarray(x, dtype=np.float64)
        return np.prod(self(x / h) / h, axis=-1)

    def shifts(self, d: int) -> np.ndarray:
        return all_shifts(self.support, d)

    def __repr__(self):
        return f"{type(self).__name__}(support={self.support})"


class CosineKernel(Kernel):
    radius = 2.0
    support = support_size(2.0)

    @property
    def phi(self):
        return cosine_phi


def shift(j: int, s: int, d: int) -> tuple[int, ...]:
    """The ``j``-th shift (1-based) of the ``s**d`` support offsets."""
    if not 1 <= j <= s**d:
        raise ValueError(f"shift index {j} outside [1, {s**d}]")
    out = np.empty(d, dtype=np.int64)
    _shift_into(j - 1, s, out)
    return tuple(int(v) for v in out)


def all_shifts(s: int, d: int) -> np.ndarray:
    """All shifts in enumeration order, shape ``(s**d, d)``."""
    out = np.empty((s**d, d), dtype=np.int64)
    for j0 in range(s**d):
        _shift_into(j0, s, out[j0])
    return out


@lru_cache(maxsize=None)
def shift_table(s: int, d: int) -> np.ndarray:
    """Read-only cached :func:`all_shifts`, as consumed by the coupling loops."""
    table = all_shifts(s, d)
    table.flags.writeable = False
    return table


def delta_weight(delta_x, sigma, h: float, kernel: Kernel | None = None) -> float:
    """Weight of the support point at shift ``sigma`` for a point offset ``delta_x``.

    ``delta_x`` is ``X - point_of(cell_index(X))``.
    """
    kernel = kernel or CosineKernel()
    dx = np.atleast_1d(np.asarray(delta_x, dtype=np.float64))
    sg = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    if dx.shape != sg.shape:
        raise ValueError("delta_x and sigma must have the same length")
    return float(_delta_weight(kernel.phi, dx, sg, float(h)))
