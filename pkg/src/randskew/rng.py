"""Counter-based random number generation with explicit seed splitting.

Every random procedure in the package takes an explicit 64-bit seed and
derives independent Philox streams from it by hashing a path of integers
(e.g. ``(seed, trial_index)``).  Concurrent trials therefore never share
generator state, and serial / parallel execution orders produce identical
draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def split(seed: int, *path: int) -> int:
    """Derive a new 64-bit seed from ``seed`` and a path of stream indices."""
    key = _splitmix64(int(seed) & _MASK64)
    for part in path:
        key = _splitmix64(key ^ ((int(part) & _MASK64) | (1 << 63)))
    return key


def generator(seed: int, *path: int) -> np.random.Generator:
    """A Philox generator keyed by ``split(seed, *path)``."""
    return np.random.Generator(np.random.Philox(key=split(seed, *path)))
