"""Portable SplitMix64 random streams.

Every random draw in the toolkit comes from here so that datasets, restart
initializations and fold assignments are bit-identical across platforms and
can be reproduced by any other implementation:

* ``splitmix64(x)`` is the standard finalizer: add ``0x9E3779B97F4A7C15``, then
  xor-shift/multiply with ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``.
* ``derive_seed(seed, *keys)`` splits a stream: for each key the state becomes
  ``splitmix64(state ^ splitmix64(key))``. String keys are first folded to an
  integer with FNV-1a (64 bit).
* ``uniform()`` takes the top 53 bits of the next output, giving ``[0, 1)``.
* ``normal()`` is Box-Muller on ``u1 = 1 - uniform()`` (so ``u1 in (0, 1]``) and
  ``u2 = uniform()``: ``sqrt(-2 ln u1) * cos(2 pi u2)``; the sine twin is dropped.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _fnv1a(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def derive_seed(seed: int, *keys: int | str) -> int:
    state = seed & MASK64
    for key in keys:
        k = _fnv1a(key) if isinstance(key, str) else int(key) & MASK64
        state = splitmix64(state ^ splitmix64(k))
    return state


class SplitMix64:
    """Sequential generator over one derived stream."""

    def __init__(self, seed: int, *keys: int | str):
        self.state = derive_seed(seed, *keys)

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of ``range(n)``."""
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def sample(self, n: int, k: int) -> list[int]:
        """``k`` distinct indices from ``range(n)``, in draw order."""
        return self.permutation(n)[:k]
