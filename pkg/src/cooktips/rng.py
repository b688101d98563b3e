"""Platform-independent deterministic random numbers for level generation.

Python's ``random`` module is avoided on purpose: its algorithms for
``randrange``/``shuffle`` are not guaranteed stable across versions, and a
generated game must serialize byte-identically everywhere.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

T = TypeVar("T")

RNG_ALGORITHM_ID = "splitmix64-v1"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream with a few sampling helpers built on ``next_u64``."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    @classmethod
    def for_game(cls, level: int, seed: int) -> "SplitMix64":
        # level and seed are folded through the mixer so (0, 1) and (1, 0) differ
        return cls(_mix((seed & _MASK) ^ _mix(level + 1)))

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return _mix(self.state)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` (rejection sampling, no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def chance(self, numerator: int, denominator: int) -> bool:
        return self.below(denominator) < numerator

    def choice(self, seq: Sequence[T]) -> T:
        return seq[self.below(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, seq: Sequence[T], k: int) -> list[T]:
        pool = list(seq)
        if k > len(pool):
            raise ValueError("sample larger than population")
        # partial Fisher-Yates from the front
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
