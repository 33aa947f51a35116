"""Blocked fork-join execution over an explicit worker count.

Every parallel phase in the package splits an index range into ``workers``
contiguous blocks and runs one nogil numba kernel per block. Returning from
:func:`run_blocks` is the barrier.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_pools: dict[int, ThreadPoolExecutor] = {}
_lock = threading.Lock()


def check_workers(workers: int) -> int:
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def _pool(workers: int) -> ThreadPoolExecutor:
    with _lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="ibspread")
            _pools[workers] = pool
        return pool


def block_bounds(n: int, workers: int) -> np.ndarray:
    """Boundaries of ``workers`` near-equal contiguous blocks of ``range(n)``."""
    return (np.arange(workers + 1, dtype=np.int64) * n) // workers


def run_blocks(fn, n: int, workers: int, *args):
    """Call ``fn(lo, hi, w, *args)`` for each block and return results in block order."""
    bounds = block_bounds(n, workers)
    if workers == 1:
        return [fn(0, n, 0, *args)]
    futures = [
        _pool(workers).submit(fn, int(bounds[w]), int(bounds[w + 1]), w, *args)
        for w in range(workers)
    ]
    return [f.result() for f in futures]
