"""Key-value sort, segmented reduce and unique-key counting.

All three run over an explicit worker count using contiguous blocks. The sort
is a stable LSD radix sort on 32-bit keys with 8-bit digits: per-block digit
histograms, a prefix sum over (digit, block), then a stable per-block scatter.
The segmented reduce blocks the element range; a run that straddles a block
boundary is finished by folding one carry per block, in block order, so sums
are bitwise reproducible for a fixed worker count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._parallel import check_workers, run_blocks

RADIX_BITS = 8
RADIX = 1 << RADIX_BITS
KEY_BITS = 32


@njit(cache=True, nogil=True)
def _digit_histogram(lo, hi, w, keys, shift, hist):
    mask = np.uint32(RADIX - 1)
    for i in range(lo, hi):
        hist[w, (keys[i] >> shift) & mask] += 1


@njit(cache=True, nogil=True)
def _digit_scatter(lo, hi, w, keys, payload, shift, offsets, keys_out, payload_out):
    mask = np.uint32(RADIX - 1)
    pos = offsets[w].copy()
    for i in range(lo, hi):
        d = (keys[i] >> shift) & mask
        keys_out[pos[d]] = keys[i]
        payload_out[pos[d]] = payload[i]
        pos[d] += 1


def key_value_sort(keys, payload, workers: int = 1):
    """Stable sort of ``payload`` by 32-bit ``keys``.

    Returns new ``(sorted_keys, permuted_payload)`` arrays; inputs are untouched.
    """
    workers = check_workers(workers)
    keys = np.ascontiguousarray(keys, dtype=np.uint32)
    payload = np.ascontiguousarray(payload)
    if keys.shape != payload.shape[:1] or keys.ndim != 1:
        raise ValueError("keys and payload must have equal length")
    n = keys.shape[0]
    src_k, src_p = keys.copy(), payload.copy()
    if n < 2:
        return src_k, src_p
    dst_k, dst_p = np.empty_like(src_k), np.empty_like(src_p)
    hist = np.zeros((workers, RADIX), dtype=np.int64)
    for shift in range(0, KEY_BITS, RADIX_BITS):
        hist[:] = 0
        run_blocks(_digit_histogram, n, workers, src_k, np.uint32(shift), hist)
        totals = hist.sum(axis=0)
        if totals.max() == n:
            # every key shares this digit; the pass would be the identity
            continue
        digit_base = np.cumsum(totals) - totals
        offsets = digit_base[None, :] + np.cumsum(hist, axis=0) - hist
        run_blocks(_digit_scatter, n, workers, src_k, src_p, np.uint32(shift),
                   offsets, dst_k, dst_p)
        src_k, dst_k = dst_k, src_k
        src_p, dst_p = dst_p, src_p
    return src_k, src_p


@njit(cache=True, nogil=True)
def _count_heads(lo, hi, w, keys, counts):
    c = 0
    for i in range(lo, hi):
        if i == 0 or keys[i] != keys[i - 1]:
            c += 1
    counts[w] = c


@njit(cache=True, nogil=True)
def _write_heads(lo, hi, w, keys, base, starts):
    r = base[w]
    for i in range(lo, hi):
        if i == 0 or keys[i] != keys[i - 1]:
            starts[r] = i
            r += 1


def _head_counts(keys, workers):
    counts = np.zeros(workers, dtype=np.int64)
    run_blocks(_count_heads, keys.shape[0], workers, keys, counts)
    return counts


def count_unique(sorted_keys, workers: int = 1) -> int:
    """Number of maximal runs of equal keys in a sorted key array."""
    workers = check_workers(workers)
    keys = np.ascontiguousarray(sorted_keys)
    return int(_head_counts(keys, workers).sum())


def segment_starts(sorted_keys, workers: int = 1) -> np.ndarray:
    """Start offsets of each equal-key run, followed by ``len(sorted_keys)``."""
    workers = check_workers(workers)
    keys = np.ascontiguousarray(sorted_keys)
    n = keys.shape[0]
    counts = _head_counts(keys, workers)
    q = int(counts.sum())
    starts = np.empty(q + 1, dtype=np.int64)
    starts[q] = n
    base = np.cumsum(counts) - counts
    run_blocks(_write_heads, n, workers, keys, base, starts)
    return starts


@njit(cache=True, nogil=True, inline="always")
def _reduce_block_scalar(lo, hi, w, r, starts, values, out, carry, carry_run):
    # single column: most runs hold one or two elements, so per-run overhead dominates
    while r < starts.shape[0] - 1 and starts[r] < hi:
        seg_lo = max(starts[r], lo)
        seg_hi = min(starts[r + 1], hi)
        acc = values[seg_lo, 0]
        for i in range(seg_lo + 1, seg_hi):
            acc += values[i, 0]
        if starts[r] >= lo:
            out[r, 0] = acc
        else:
            carry[w, 0] = acc
            carry_run[w] = r
        r += 1


@njit(cache=True, nogil=True)
def _reduce_block(lo, hi, w, starts, values, out, carry, carry_run):
    carry_run[w] = -1
    if lo >= hi:
        return
    b = values.shape[1]
    r = np.searchsorted(starts, lo, side="right") - 1
    if b == 1:
        _reduce_block_scalar(lo, hi, w, r, starts, values, out, carry, carry_run)
        return
    acc = np.empty(b, values.dtype)
    while r < starts.shape[0] - 1 and starts[r] < hi:
        seg_lo = max(starts[r], lo)
        seg_hi = min(starts[r + 1], hi)
        for c in range(b):
            acc[c] = values[seg_lo, c]
        for i in range(seg_lo + 1, seg_hi):
            for c in range(b):
                acc[c] += values[i, c]
        if starts[r] >= lo:
            for c in range(b):
                out[r, c] = acc[c]
        else:
            for c in range(b):
                carry[w, c] = acc[c]
            carry_run[w] = r
        r += 1


@njit(cache=True, nogil=True)
def _fold_carries(out, carry, carry_run):
    for w in range(carry_run.shape[0]):
        r = carry_run[w]
        if r >= 0:
            for c in range(out.shape[1]):
                out[r, c] += carry[w, c]


def reduce_segments(starts, values, out, workers: int = 1):
    """Sum ``values`` (2-D, one row per element) over precomputed runs into ``out``."""
    carry = np.empty((workers, values.shape[1]), dtype=values.dtype)
    carry_run = np.empty(workers, dtype=np.int64)
    run_blocks(_reduce_block, values.shape[0], workers, starts, values, out, carry, carry_run)
    _fold_carries(out, carry, carry_run)
    return out


def segmented_reduce(sorted_keys, values, workers: int = 1):
    """Sum consecutive ``values`` whose keys match.

    ``values`` may be 1-D or 2-D; rows of a 2-D array are summed
    componentwise. Returns ``(run_keys, run_sums)``.
    """
    workers = check_workers(workers)
    keys = np.ascontiguousarray(sorted_keys)
    values = np.asarray(values)
    if values.shape[:1] != keys.shape:
        raise ValueError("keys and values must have equal length")
    if __debug__ and keys.shape[0] > 1 and np.any(keys[1:] < keys[:-1]):
        raise ValueError("segmented_reduce requires sorted keys")
    starts = segment_starts(keys, workers)
    width = int(np.prod(values.shape[1:], dtype=np.int64))
    vals2 = np.ascontiguousarray(values.reshape(values.shape[0], width))
    q = starts.shape[0] - 1
    out = np.empty((q, vals2.shape[1]), dtype=vals2.dtype)
    reduce_segments(starts, vals2, out, workers)
    return keys[starts[:-1]], out.reshape((q,) + values.shape[1:])
