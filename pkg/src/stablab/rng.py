"""Counter-based random streams keyed by ``(master_seed, substream_index)``.

Every Monte Carlo block draws from its own Philox stream, so results never
depend on how blocks are scheduled across workers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64 = (1 << 64) - 1
_CHILD_BITS = 20


@dataclass(frozen=True)
class RngSpec:
    master_seed: int
    substream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _U64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        if not 0 <= int(self.substream_index) <= _U64:
            raise ValueError(f"substream_index must fit in 64 bits, got {self.substream_index}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.substream_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngSpec":
        """Substream ``index`` nested under this one (20 bits per level, three levels deep)."""
        if not 0 <= index < (1 << _CHILD_BITS):
            raise ValueError(f"child index out of range: {index}")
        if self.substream_index >= (1 << (64 - _CHILD_BITS)):
            raise ValueError("substream nesting too deep")
        return RngSpec(self.master_seed, (self.substream_index << _CHILD_BITS) | index)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngSpec, a Generator, or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngSpec(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def as_spec(rng) -> RngSpec:
    if isinstance(rng, RngSpec):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngSpec(int(rng))
    raise TypeError("block-parallel estimators need an RngSpec or an int seed")
