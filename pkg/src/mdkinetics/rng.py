"""Counter-based random stream for the particle engine.

Each draw is a pure function of (seed, counter), computed with the splitmix64
output function.  Streams are trivially splittable (disjoint counter ranges)
and the result is bit-identical regardless of worker count or whether the
vectorized numpy path or the compiled kernel produced it.
"""

from __future__ import annotations

import numpy as np

U64 = np.uint64

_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)

#: scale turning the top 53 bits of a uint64 into a double in [0, 1)
_INV53 = 1.0 / 9007199254740992.0

#: counter slots reserved per step (channels x draws), used to lay out streams
SLOTS_PER_STEP = 16


def draw_u64(seed: int, counters: np.ndarray) -> np.ndarray:
    """splitmix64 output for an array of uint64 counters (vectorized reference)."""
    z = (U64(seed) + (counters.astype(U64) + U64(1)) * _GOLDEN)
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


def to_unit(u: np.ndarray) -> np.ndarray:
    """Map uint64 draws to doubles in [0, 1) using the top 53 bits."""
    return (u >> U64(11)) * _INV53


def sign_bit(u: np.ndarray) -> np.ndarray:
    """+1.0 / -1.0 from the lowest bit (independent of the top 53 bits)."""
    return np.where((u & U64(1)).astype(bool), 1.0, -1.0)


def counters(step: int, slot: int, n: int) -> np.ndarray:
    """Counter block for one (step, channel-slot) pair over n particles."""
    base = (U64(step) * U64(SLOTS_PER_STEP) + U64(slot)) * U64(n)
    return base + np.arange(n, dtype=np.uint64)
