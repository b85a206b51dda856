"""Keyed random streams.

Every random draw in the package comes from a generator keyed by
``(seed, replication, item, purpose)`` so that per-item thinning draws are
independent of each other and reproducible regardless of evaluation order.
"""
from __future__ import annotations

import zlib

import numpy as np

NO_ITEM = 0


def _tag(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, replication: int = 0, item: int = NO_ITEM, purpose: str = "") -> np.random.Generator:
    """Return an independent generator for one (seed, replication, item, purpose) key."""
    if seed < 0 or replication < 0 or item < 0:
        raise ValueError("stream keys must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), int(item), _tag(purpose)))
    return np.random.default_rng(ss)


class StreamFactory:
    """Bound ``(seed, replication)`` pair handing out item/purpose sub-streams."""

    def __init__(self, seed: int, replication: int = 0):
        self.seed = int(seed)
        self.replication = int(replication)

    def __call__(self, purpose: str, item: int = NO_ITEM) -> np.random.Generator:
        return stream(self.seed, self.replication, item, purpose)

    def __repr__(self) -> str:
        return f"StreamFactory(seed={self.seed}, replication={self.replication})"
