"""Zipf popularity under the independent reference model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def zipf_pmf(catalog_size: int, tilt: float) -> np.ndarray:
    """Zipf pmf ``p(i) ∝ i**-tilt`` over items ``1..catalog_size``."""
    if int(catalog_size) != catalog_size or catalog_size < 1:
        raise ValueError(f"catalog_size must be a positive integer, got {catalog_size}")
    if not np.isfinite(tilt) or tilt < 0:
        raise ValueError(f"tilt must be non-negative, got {tilt}")
    ranks = np.arange(1, int(catalog_size) + 1, dtype=float)
    w = ranks ** (-float(tilt))
    return w / w.sum()


@dataclass(frozen=True)
class DemandModel:
    catalog_size: int = 100
    tilt: float = 0.1
    pmf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = zipf_pmf(self.catalog_size, self.tilt)
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)

    @property
    def M(self) -> int:
        return int(self.catalog_size)


def sample_request(model: DemandModel, rng: np.random.Generator, size=None):
    """Draw item indices (1-based) i.i.d. from the popularity pmf."""
    idx = rng.choice(model.M, size=size, p=model.pmf) + 1
    return int(idx) if size is None else idx
