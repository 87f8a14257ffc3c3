"""Deterministic random streams built on counter-based Philox generators.

Every randomized operation takes a :class:`Seed` and derives generators for
disjoint counter blocks. Draws therefore depend only on (seed, block indices),
never on execution order or thread count, which is what makes seeded commands
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Seed:
    """Root of a reproducible random stream.

    ``value`` and ``stream`` are unsigned 64-bit integers. Identical pairs
    yield bit-identical draws regardless of scheduling because consumers
    address disjoint Philox counter blocks instead of sharing generator state.
    """

    value: int
    stream: int = 0

    def __post_init__(self) -> None:
        for name in ("value", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise ValueError(f"Seed.{name} must be an unsigned 64-bit integer")

    def child(self, index: int) -> "Seed":
        """Derived seed with a distinct stream, for nested randomized stages."""
        mixed = (self.stream * 0x9E3779B97F4A7C15 + int(index) + 1) & _MASK64
        return Seed(self.value, mixed)


def generator(seed: Seed, *block: int) -> np.random.Generator:
    """Independent generator for one counter block under ``seed``.

    Up to three block indices select disjoint 2^64-draw regions of the
    256-bit Philox counter space (index order: coarsest last), so per-path
    or per-draw-index streams never overlap.
    """
    if len(block) > 3:
        raise ValueError("at most three block indices are supported")
    counter = [0, 0, 0, 0]
    for i, idx in enumerate(block):
        counter[i + 1] = int(idx) & _MASK64
    bitgen = np.random.Philox(key=[seed.value, seed.stream], counter=counter)
    return np.random.Generator(bitgen)
