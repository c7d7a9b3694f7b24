# Copyright (c), CommunityLogiq Software

"""
Portable 64-bit generator behind every random draw in the project.

xorshift64* (shift triple 12/25/27, output multiplier 0x2545F4914F6CDD1D),
with the user seed passed through one splitmix64 step so that small or zero
seeds still give a well mixed, non-zero state. The streams are defined
bit-for-bit here and do not depend on numpy's generators.
"""

import bisect
from typing import List, Sequence

MASK64 = (1 << 64) - 1
MULTIPLIER = 0x2545F4914F6CDD1D
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int):
        state = splitmix64(seed & MASK64)
        self._state = state if state != 0 else GOLDEN_GAMMA

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * MULTIPLIER) & MASK64

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound); biased low draws are rejected"""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        if bound == 1:
            return 0
        threshold = (1 << 64) % bound
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % bound

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits"""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def choose(self, cumulative: Sequence[float]) -> int:
        """Index drawn from a cumulative distribution ending at (about) 1"""
        u = self.next_float() * cumulative[-1]
        index = bisect.bisect_right(cumulative, u)
        return min(index, len(cumulative) - 1)

    def permutation(self, n: int) -> List[int]:
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
