"""Reproducible RNG streams.

Every experiment derives child streams from a 64-bit master seed and a
64-bit stream label.  Streams are counter-based (Philox), so trials can be
farmed out in any order and still reproduce bit-for-bit: the generator for
(master_seed, stream_id) never depends on how many other streams were used.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    """One SplitMix64 step; decorrelates adjacent stream labels."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def child_key(master_seed: int, stream_id: int) -> tuple[int, int]:
    """128-bit child-stream key from the 64-bit (seed, label) mix."""
    a = _splitmix64(master_seed & _MASK64)
    b = _splitmix64((master_seed ^ _splitmix64(stream_id & _MASK64)) & _MASK64)
    return a, b


def stream(master_seed: int, stream_id: int) -> np.random.Generator:
    """Generator for one labelled stream, deterministic in (seed, label)."""
    a, b = child_key(master_seed, stream_id)
    seq = np.random.SeedSequence(entropy=a, spawn_key=(b,))
    return np.random.Generator(np.random.PCG64DXSM(seq))
