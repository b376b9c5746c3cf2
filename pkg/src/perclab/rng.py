"""Counter-based randomness.

Every random bit in the package is a pure function of ``(seed, stream, key)``:

* ``key`` is a stable 64-bit identifier of an edge or vertex (BLAKE2b of its
  canonical content, or the rolling key carried by oriented-tree words);
* ``stream`` separates independent uses (trial index, omega1 choices, ...);
* the value is ``splitmix64(splitmix64(key ^ splitmix64(seed)) + stream * G)``
  where ``G = 0x9E3779B97F4A7C15``; the top 53 bits form a double in [0, 1).

Because nothing is sequential, results do not depend on enumeration order,
window shape, chunking or the number of workers.  Sequential walk streams use
numpy's Philox keyed by ``SeedSequence([seed, stream])``.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

__all__ = [
    "GOLDEN",
    "edge_key",
    "key_of",
    "mix64",
    "open_mask",
    "stream_generator",
    "uniform",
    "uniforms",
]

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """splitmix64 finalizer on Python ints."""
    z &= MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, in place on a fresh uint64 array."""
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def key_of(obj) -> int:
    """Stable 64-bit key of a canonical, repr-stable object."""
    h = hashlib.blake2b(repr(obj).encode(), digest_size=8).digest()
    return int.from_bytes(h, "little")


def edge_key(ka: int, kb: int) -> int:
    """Order-independent key of the edge between two vertex keys."""
    lo, hi = (ka, kb) if ka <= kb else (kb, ka)
    return mix64(mix64(lo) ^ ((hi * GOLDEN) & MASK))


def uniform(seed: int, stream: int, key: int) -> float:
    z = mix64((key ^ mix64(seed)) & MASK)
    z = mix64((z + (stream + 1) * GOLDEN) & MASK)
    return (z >> 11) * _INV53


def _raw53(seed, streams, keys) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.uint64)
    streams = np.asarray(streams, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64_np(keys ^ np.uint64(mix64(seed)))
        s = (streams + np.uint64(1)) * np.uint64(GOLDEN)
        z = _mix64_np(z[:, None] + s[None, :])
    z >>= np.uint64(11)
    return z


def uniforms(seed: int, streams, keys) -> np.ndarray:
    """Vectorized :func:`uniform`; returns an array of shape (len(keys), len(streams))."""
    return _raw53(seed, streams, keys).astype(np.float64) * _INV53


def open_mask(seed: int, streams, keys, p: float) -> np.ndarray:
    """``uniforms(seed, streams, keys) < p`` without the float conversion."""
    # p * 2**53 is exact, so u < p iff the 53-bit integer is below its ceiling
    threshold = np.uint64(min(math.ceil(p * (1 << 53)), 1 << 53))
    return _raw53(seed, streams, keys) < threshold


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & MASK, stream])))
