"""SplitMix64 generator.

Every stochastic step in training (weight init, shuffling, dropout masks) draws
from this stream so that a seed fully determines a run, independent of numpy's
generator implementations.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


def prng_next(state: int) -> tuple[int, int]:
    """Return ``(value, new_state)`` for one SplitMix64 step."""
    state = (state + _GAMMA) & _MASK
    return _mix(state), state


class Prng:
    """Stateful SplitMix64 stream with vectorised bulk draws.

    Bulk draws produce exactly the values that repeated scalar draws would;
    SplitMix64's state is a counter, so the n-th state is computable directly.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        value, self.state = prng_next(self.state)
        return value

    def u64_array(self, n: int) -> np.ndarray:
        n = int(n)
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GAMMA) & _MASK
        return z

    def uniform(self) -> float:
        # top 53 bits: value / 2**64 truncated to double precision, never 1.0
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform_array(self, shape) -> np.ndarray:
        size = int(np.prod(shape, dtype=np.int64))
        u = (self.u64_array(size) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return u.reshape(shape)

    def gaussian(self) -> float:
        """Standard normal via Box-Muller (cosine branch only)."""
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)

    def gaussian_array(self, shape) -> np.ndarray:
        size = int(np.prod(shape, dtype=np.int64))
        u = self.uniform_array(2 * size)
        u1, u2 = u[0::2], u[1::2]
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        keys = self.u64_array(n)
        return np.argsort(keys, kind="stable")

    def spawn(self) -> "Prng":
        """Independent child stream seeded from this one."""
        return Prng(self.next_u64())
