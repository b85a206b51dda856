"""Spatial cache placement by thinning the node process, one item at a time.

Three operators are provided: independent coin flips, Matérn II hard-core
thinning, and soft-core thinning with random exclusion marks and the
exponential kernel ``f_c``. A node caches item ``i`` iff it survives the
thinning run for item ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import special

from .demand import DemandModel
from .spatial import PairIndex, PointPattern
from .streams import StreamFactory

DEFAULT_KERNEL_TOL = 1e-6


@dataclass(frozen=True)
class MarkLaw:
    """Gamma mark distribution parametrised by mean and scale.

    ``scale == 0`` (or ``mean == 0``) gives a degenerate law at ``mean``.
    """

    mean: float
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mean) and self.mean >= 0):
            raise ValueError(f"mark mean must be non-negative, got {self.mean}")
        if not (np.isfinite(self.scale) and self.scale >= 0):
            raise ValueError(f"mark scale must be non-negative, got {self.scale}")

    @classmethod
    def gamma(cls, shape: float, scale: float) -> "MarkLaw":
        if shape <= 0 or scale <= 0:
            raise ValueError("gamma shape and scale must be positive")
        return cls(shape * scale, scale)

    @property
    def degenerate(self) -> bool:
        return self.scale == 0 or self.mean == 0

    @property
    def shape(self) -> float:
        return np.inf if self.degenerate else self.mean / self.scale

    @property
    def variance(self) -> float:
        return 0.0 if self.degenerate else self.mean * self.scale

    @property
    def second_moment(self) -> float:
        return self.variance + self.mean**2

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.degenerate:
            return np.full(n, self.mean)
        return rng.gamma(self.shape, self.scale, size=n)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            return (x >= self.mean).astype(float)
        return special.gammainc(self.shape, np.maximum(x, 0.0) / self.scale)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.degenerate:
            return np.full_like(u, self.mean)
        return self.scale * special.gammaincinv(self.shape, u)


@dataclass(frozen=True)
class SoftCoreParams:
    """Per-item mark laws plus the shared retention factor and kernel softness.

    ``softness=np.inf`` selects the hard kernel ``1{r <= m + n}``.
    """

    marks: tuple[MarkLaw, ...]
    p0: float = 1.0
    softness: float = 10.0
    kernel_tol: float = DEFAULT_KERNEL_TOL

    def __post_init__(self):
        object.__setattr__(self, "marks", tuple(self.marks))
        if not 0 < self.p0 <= 1:
            raise ValueError(f"p0 must lie in (0, 1], got {self.p0}")
        if not self.softness > 0:
            raise ValueError(f"softness c must be positive, got {self.softness}")
        if not 0 < self.kernel_tol < 1:
            raise ValueError("kernel_tol must lie in (0, 1)")

    @property
    def tail(self) -> float:
        """Distance beyond ``m + n`` at which the kernel drops below ``kernel_tol``."""
        if np.isinf(self.softness):
            return 0.0
        return np.log(1.0 / self.kernel_tol) / self.softness


@dataclass(frozen=True)
class Independent:
    probabilities: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.probabilities, dtype=float).ravel()
        if np.any((q < 0) | (q > 1)):
            raise ValueError("independent retention probabilities must lie in [0, 1]")
        object.__setattr__(self, "probabilities", q)

    def __len__(self):
        return len(self.probabilities)

    name = "independent"


@dataclass(frozen=True)
class HardCore:
    radii: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float).ravel()
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("exclusion radii must be finite and non-negative")
        object.__setattr__(self, "radii", r)

    def __len__(self):
        return len(self.radii)

    name = "matern2"


@dataclass(frozen=True)
class SoftCore:
    params: SoftCoreParams

    def __len__(self):
        return len(self.params.marks)

    name = "sscc"


PlacementPolicy = Union[Independent, HardCore, SoftCore]


@dataclass(frozen=True, eq=False)
class PlacementResult:
    """Cache membership ``z[node, item]`` and its row sums ``C(x)``."""

    z: np.ndarray
    retained: list = field(repr=False)

    @property
    def cache_sizes(self) -> np.ndarray:
        return self.z.sum(axis=1)

    @property
    def M(self) -> int:
        return self.z.shape[1]


def kernel_fc(r, m, n, c):
    """Soft deletion kernel ``exp(-c * max(r - m - n, 0))``; ``c=inf`` is the hard indicator."""
    r, m, n = (np.asarray(a, dtype=float) for a in (r, m, n))
    if np.any(r < 0) or np.any(m < 0) or np.any(n < 0):
        raise ValueError("kernel arguments must be non-negative")
    if not c > 0:
        raise ValueError("softness c must be positive")
    gap = np.maximum(r - (m + n), 0.0)
    if np.isinf(c):
        out = (gap == 0).astype(float)
    else:
        out = np.exp(-c * gap)
    return out if out.ndim else float(out)


def _losers(i, j, weights):
    # larger weight loses; exact ties go against the larger index
    swap = (weights[j] > weights[i]) | ((weights[j] == weights[i]) & (j > i))
    return np.where(swap, j, i)


def soft_core_survivors(n, i, j, d, marks, weights, softness, p0, rng, draws=None):
    """Realise the pairwise soft deletion followed by ``p0`` thinning.

    For each pair the point with the larger weight is deleted with
    probability ``f_c(d, m_i, m_j)``. Deleted points keep deleting others.
    With ``draws`` set, returns a ``(draws, n)`` boolean array of independent
    realisations for the same marks and weights.
    """
    x = _losers(i, j, weights)
    f = kernel_fc(d, marks[i], marks[j], softness) if len(d) else np.empty(0)
    certain = f >= 1.0
    if draws is None:
        hit = certain.copy()
        soft = ~certain
        if soft.any():
            hit[soft] = rng.random(soft.sum()) < f[soft]
        alive = np.ones(n, dtype=bool)
        alive[x[hit]] = False
        if p0 < 1:
            alive &= rng.random(n) < p0
        return alive
    hit = rng.random((draws, len(d))) < f
    rows, cols = np.nonzero(hit)
    killed = np.bincount(rows * n + x[cols], minlength=draws * n).reshape(draws, n)
    alive = killed == 0
    if p0 < 1:
        alive &= rng.random((draws, n)) < p0
    return alive


def _pairs(pattern: PointPattern, radius: float, pairs: PairIndex | None):
    if pairs is None:
        pairs = PairIndex(pattern, radius)
    return pairs.within(radius)


def thin_independent(pattern: PointPattern, q: float, rng: np.random.Generator) -> np.ndarray:
    """Keep each point independently with probability ``q``."""
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return np.flatnonzero(rng.random(len(pattern)) < q)


def thin_matern2(pattern: PointPattern, exclusion_radius: float, rng: np.random.Generator,
                 pairs: PairIndex | None = None) -> np.ndarray:
    """Matérn II: keep a point iff it has the lowest weight within the exclusion radius."""
    if exclusion_radius < 0:
        raise ValueError("exclusion radius must be non-negative")
    n = len(pattern)
    weights = rng.random(n)
    if exclusion_radius == 0 or n < 2:
        return np.arange(n)
    i, j, _ = _pairs(pattern, exclusion_radius, pairs)
    alive = np.ones(n, dtype=bool)
    alive[_losers(i, j, weights)] = False
    return np.flatnonzero(alive)


def thin_sscc(pattern: PointPattern, params: SoftCoreParams, item: int, rng: np.random.Generator,
              pairs: PairIndex | None = None, return_marks: bool = False):
    """Soft-core thinning for one item (``item`` is 1-based).

    Marks and weights are drawn fresh from ``rng``; pairs whose deletion
    probability is below ``params.kernel_tol`` are skipped.
    """
    law = params.marks[item - 1]
    n = len(pattern)
    marks = law.sample(rng, n)
    weights = rng.random(n)
    if n >= 2:
        reach = 2.0 * marks.max() + params.tail
        i, j, d = _pairs(pattern, reach, pairs)
        keep = d <= marks[i] + marks[j] + params.tail
        i, j, d = i[keep], j[keep], d[keep]
    else:
        i = j = np.empty(0, dtype=np.intp)
        d = np.empty(0)
    alive = soft_core_survivors(n, i, j, d, marks, weights, params.softness, params.p0, rng)
    idx = np.flatnonzero(alive)
    if return_marks:
        return idx, marks, weights
    return idx


def place_all_items(pattern: PointPattern, policy: PlacementPolicy, demand: DemandModel,
                    streams: StreamFactory, pairs: PairIndex | None = None) -> PlacementResult:
    """Thin the node pattern independently for every item and assemble caches."""
    M = demand.M
    if len(policy) != M:
        raise ValueError(f"policy has {len(policy)} per-item parameters, demand has {M} items")
    n = len(pattern)
    z = np.zeros((n, M), dtype=bool)
    if pairs is None and not isinstance(policy, Independent) and n >= 2:
        pairs = PairIndex(pattern, 1.0)
    retained = []
    for item in range(1, M + 1):
        rng = streams("thin", item)
        if isinstance(policy, Independent):
            idx = thin_independent(pattern, policy.probabilities[item - 1], rng)
        elif isinstance(policy, HardCore):
            idx = thin_matern2(pattern, policy.radii[item - 1], rng, pairs)
        elif isinstance(policy, SoftCore):
            idx = thin_sscc(pattern, policy.params, item, rng, pairs)
        else:
            raise TypeError(f"unknown placement policy {policy!r}")
        z[idx, item - 1] = True
        retained.append(idx)
    return PlacementResult(z, retained)


def soft_core_policy(mark_means: Sequence[float], scale: float = 1.0, p0: float = 1.0,
                     softness: float = 10.0, kernel_tol: float = DEFAULT_KERNEL_TOL) -> SoftCore:
    """Soft-core policy with gamma marks of the given per-item means and a common scale."""
    marks = tuple(MarkLaw(float(m), scale) for m in mark_means)
    return SoftCore(SoftCoreParams(marks, p0=p0, softness=softness, kernel_tol=kernel_tol))
