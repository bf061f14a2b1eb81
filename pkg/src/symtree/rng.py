"""Portable seeded pseudo-random generator.

The generator is xorshift64* (Marsaglia shifts 12/25/27, output multiplier
0x2545F4914F6CDD1D).  The 64-bit state is initialised from the user seed
with one round of splitmix64 so that seed 0 is valid.  Doubles are built
from the top 53 bits of each output: ``(x >> 11) * 2**-53``, which lies in
[0, 1).  The algorithm is small enough to port, so datasets generated here
can be reproduced bit-for-bit elsewhere.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold several integers into one 64-bit seed."""
    h = 0
    for p in parts:
        h = splitmix64(h ^ (int(p) & _MASK))
    return h


class XorShift64Star:
    """xorshift64* generator."""

    def __init__(self, seed: int) -> None:
        state = splitmix64(int(seed) & _MASK)
        self._state = state or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & _MASK

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float, high: float, size: int | tuple[int, ...] | None = None):
        if size is None:
            return low + (high - low) * self.random()
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape)) if shape else 1
        out = np.fromiter((self.random() for _ in range(count)), dtype=np.float64, count=count)
        return (low + (high - low) * out).reshape(shape)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, no modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def permutation(self, n: int) -> np.ndarray:
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx
