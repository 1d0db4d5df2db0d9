"""Deterministic random number generation for the synthetic data pipeline.

Every stochastic artifact in this package (scene frames, layer sequences,
fringe noise, synthetic feature records) is driven by the generator below
instead of a platform RNG, so a fixed seed yields byte-identical outputs on
every machine and so the stream can be reproduced from this description
alone.

Generator: xorshift64* (64-bit shift-register scrambled by a multiply).
State is a nonzero 64-bit integer. One step, with all arithmetic modulo
2^64::

    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    state = x
    output = (x * 0x2545F4914F6CDD1D) mod 2^64

A seed of 0 is remapped to 0x9E3779B97F4A7C15 (state must be nonzero).

Derived draws (exact consumption order is part of the contract):

* ``random()``        -- top 53 bits of one output, times 2^-53; in [0, 1).
* ``uniform(a, b)``   -- ``a + (b - a) * random()``; one output.
* ``randint(n)``      -- ``floor(random() * n)``; one output.
* ``normal(mu, sd)``  -- Box-Muller cosine branch from two ``random()``
                         draws: ``sqrt(-2 ln(1-u1)) * cos(2 pi u2)``.
                         Consumes exactly two outputs, nothing cached.
* ``exponential()``   -- ``-ln(1 - random())``; one output.
* ``normal_block(n)`` -- n normals in raster order from ceil(n/2)
                         Box-Muller pairs (cosine then sine branch);
                         consumes ``2 * ceil(n/2)`` outputs.

Substreams for per-frame work are derived with :func:`derive_seed`, which
applies the splitmix64 finalizer to ``base + (index + 1) * GOLDEN``.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MULT = 0x2545F4914F6CDD1D

_TWO_POW_NEG53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi


def splitmix64(x: int) -> int:
    """One splitmix64 finalizer step; used only for seed derivation."""
    x = (x + GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(base: int, index: int) -> int:
    """Deterministic child seed for substream ``index`` of stream ``base``."""
    if index < 0:
        raise ValueError("substream index must be >= 0")
    return splitmix64((base + (index + 1) * GOLDEN) & MASK64)


class Xorshift64Star:
    """xorshift64* stream implementing the contract in the module docstring."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        state = seed & MASK64
        if state == 0:
            state = GOLDEN
        self._state = state

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & MASK64

    def random(self) -> float:
        return (self.next_u64() >> 11) * _TWO_POW_NEG53

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def randint(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randint requires n >= 1")
        return int(self.random() * n)

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        u1 = self.random()
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        return mu + sigma * r * math.cos(_TWO_PI * u2)

    def exponential(self, scale: float = 1.0) -> float:
        return -scale * math.log(1.0 - self.random())

    def normal_block(self, n: int, mu: float = 0.0, sigma: float = 1.0) -> list[float]:
        """n Gaussian draws from ceil(n/2) Box-Muller pairs, in order."""
        out: list[float] = []
        pairs = (n + 1) // 2
        for _ in range(pairs):
            u1 = self.random()
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(1.0 - u1))
            theta = _TWO_PI * u2
            out.append(mu + sigma * r * math.cos(theta))
            out.append(mu + sigma * r * math.sin(theta))
        del out[n:]
        return out
