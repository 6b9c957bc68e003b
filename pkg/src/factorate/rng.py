"""Counter-based random draws keyed by ``(seed, tag, *indices)``.

Each draw is a pure function of its key, hashed with the SplitMix64
finalizer, so results do not depend on evaluation order, array shape or
thread count. Index arguments broadcast like numpy arrays.
"""
from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def tag_hash(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def bits(seed: int, tag: str, *indices) -> np.ndarray:
    """Raw 64-bit hashes for each broadcast index tuple."""
    key = np.uint64((int(seed) & _MASK64) ^ tag_hash(tag))
    idx = np.broadcast_arrays(*[np.asarray(i, dtype=np.int64) for i in indices])
    shape = idx[0].shape if idx else ()
    with np.errstate(over="ignore"):
        h = _mix(np.full(shape, key, dtype=np.uint64) + _GOLDEN)
        for i in idx:
            h = _mix(h + (i.astype(np.uint64) + np.uint64(1)) * _GOLDEN)
    return np.asarray(h, dtype=np.uint64)


def uniform(seed: int, tag: str, *indices) -> np.ndarray:
    """Uniform draws on [0, 1) with 53 bits of resolution."""
    return (bits(seed, tag, *indices) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normal(seed: int, tag: str, *indices) -> np.ndarray:
    """Standard normal draws via Box-Muller on two keyed uniform streams."""
    u1 = uniform(seed, tag + "#bm0", *indices)
    u2 = uniform(seed, tag + "#bm1", *indices)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def logistic(seed: int, tag: str, *indices) -> np.ndarray:
    u = uniform(seed, tag, *indices)
    # keep away from 0 so the log stays finite
    u = np.clip(u, 2.0**-54, None)
    return np.log(u) - np.log1p(-u)


def derive_seed(seed: int, *path: int) -> int:
    """Child seed for replication bookkeeping, e.g. ``(base, size_idx, rep)``."""
    return int(bits(seed, "derive-seed", *path).reshape(-1)[0])
