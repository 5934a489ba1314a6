"""Counter-based keyed random numbers.

Every weight of an environment is a pure function of ``(key, x, t, k)``,
where ``k`` indexes the auxiliary draws a sampler consumes.  The
generator is the SplitMix64 output function applied to the counter
``row_key(key, t, k) + (x + 1) * GOLDEN`` in wrapping 64-bit arithmetic,
so a row of weights is exactly the SplitMix64 stream seeded with the row
key.  Because nothing depends on traversal order, enlarging a region never
changes existing weights and rows may be generated in any order.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_GOLDEN_U = np.uint64(GOLDEN)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(12)
_TWO_M52 = 2.0**-52


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (wrapping at 64 bits)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1_U
    z = (z ^ (z >> _S27)) * _M2_U
    return z ^ (z >> _S31)


def combine(*parts: int) -> int:
    """Fold integers into a single 64-bit key."""
    h = 0x6A09E667F3BCC908
    for p in parts:
        h = mix64(h ^ mix64((p & MASK64) + GOLDEN))
    return h


def label_to_int(label: str | int) -> int:
    if isinstance(label, int):
        return label & MASK64
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master: int, *labels: str | int) -> int:
    """A 64-bit seed for the substream named by ``labels`` under ``master``."""
    return combine(master, *(label_to_int(lab) for lab in labels))


def row_key(key: int, t: int, k: int = 0) -> int:
    return combine(key, t, k)


def row_keys(key: int, ts: np.ndarray, k: int = 0) -> np.ndarray:
    """Vectorized :func:`row_key` over an array of heights."""
    ts = np.asarray(ts, dtype=np.int64)
    if ts.size > 64:
        t0 = int(ts.min())
        span = int(ts.max()) - t0 + 1
        if span < ts.size:
            return row_keys(key, np.arange(t0, t0 + span), k)[ts - t0]
    ts = ts.astype(np.uint64)
    h = np.uint64(combine(key))  # identical to folding ``key`` first
    with np.errstate(over="ignore"):
        h = _mix64_array(h ^ _mix64_array(ts + _GOLDEN_U))
        kk = np.uint64(mix64(((k & MASK64) + GOLDEN) & MASK64))
        return _mix64_array(h ^ kk)


def uniforms(key: int, xs: np.ndarray, t, k: int = 0) -> np.ndarray:
    """Uniform draws in the open interval (0, 1), one per entry of ``xs``.

    ``t`` is a single height or an array of heights matching ``xs``.  The
    52 high bits of the hash are used so that ``(m + 0.5) * 2**-52`` is
    exact and never rounds to 0 or 1.
    """
    if np.ndim(t):
        base = row_keys(key, t, k)
    else:
        base = np.uint64(row_key(key, int(t), k))
    counters = (np.asarray(xs, dtype=np.int64).astype(np.uint64) + np.uint64(1)) * _GOLDEN_U
    h = _mix64_array(counters + base)
    return ((h >> _S12).astype(np.float64) + 0.5) * _TWO_M52
