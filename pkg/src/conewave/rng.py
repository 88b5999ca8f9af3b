"""Seeded, splittable random streams.

A stream is named by ``(seed, stream_id, path)``; the triple is fed to a
numpy ``SeedSequence`` as entropy plus spawn key, so distinct names give
statistically independent PCG64 generators and the same name always
reproduces the same draws, whichever thread consumes it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        key = (self.stream_id & _MASK64,) + tuple(self.path)
        ss = np.random.SeedSequence(self.seed & _MASK64, spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, index: int) -> "RngStream":
        return replace(self, path=self.path + (int(index),))

    def to_dict(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id, "path": list(self.path)}


# stream ids reserved for distinct purposes within one seed
STREAM_BOUNDARY = 0
STREAM_DIAGNOSTICS = 1
STREAM_PAIRS = 2
STREAM_CONTROL = 3


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream or a plain integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")
