"""Monte Carlo estimation over independent replications.

One replication draws a mother Poisson pattern, runs every requested
placement policy on it, and scores uniformly placed receivers ("probes") in
the evaluation square. Confidence intervals use the normal approximation
over replication-level means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse, stats

from .demand import DemandModel
from .placement import PlacementPolicy, PlacementResult, place_all_items
from .spatial import PairIndex, PointPattern, Window, sample_ppp
from .streams import StreamFactory


@dataclass(frozen=True)
class ReplicationPlan:
    replications: int = 200
    seed: int = 0
    probes: int = 500
    confidence: float = 0.95

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("at least one replication is required")
        if self.probes < 1:
            raise ValueError("at least one probe per replication is required")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class EstimateWithCI:
    estimate: float
    lower: float
    upper: float
    stderr: float
    n: int

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _z(confidence: float) -> float:
    return float(stats.norm.ppf(0.5 + confidence / 2))


def mean_ci(values, confidence: float = 0.95, bounds=(-np.inf, np.inf)) -> EstimateWithCI:
    """Normal-approximation CI for the mean of i.i.d. replication values."""
    v = np.asarray(values, dtype=float).ravel()
    if len(v) == 0:
        raise ValueError("no samples")
    est = float(math.fsum(v) / len(v))
    se = float(np.std(v, ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
    half = _z(confidence) * se
    lo = max(bounds[0], est - half)
    hi = min(bounds[1], est + half)
    return EstimateWithCI(est, min(lo, est), max(hi, est), se, len(v))


def coverage_matrix(probes: np.ndarray, nodes: np.ndarray, R: float, window: Window) -> sparse.csr_matrix:
    """Sparse ``(probes, nodes)`` incidence of node within distance ``R`` of probe."""
    tree = window.kdtree(nodes)
    if window.edge_mode == "torus":
        probes = np.mod(probes, window.side_length)
    lists = tree.query_ball_point(probes, R)
    indptr = np.zeros(len(probes) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(x) for x in lists])
    indices = np.fromiter((j for x in lists for j in x), dtype=np.int64, count=indptr[-1])
    data = np.ones(len(indices), dtype=np.float32)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(probes), len(nodes)))


def nearest_distances(points: np.ndarray, probes: np.ndarray, window: Window) -> np.ndarray:
    if len(points) == 0:
        return np.full(len(probes), np.inf)
    tree = window.kdtree(points)
    if window.edge_mode == "torus":
        probes = np.mod(probes, window.side_length)
    d, _ = tree.query(probes, k=1)
    return d


@dataclass(frozen=True)
class ScdfEstimate:
    r: np.ndarray
    H: np.ndarray
    empty: bool = False


def estimate_scdf(retained: PointPattern | np.ndarray, probes: np.ndarray, r_grid,
                  window: Window | None = None) -> ScdfEstimate:
    """Empirical contact distribution of the retained set seen from ``probes``."""
    if isinstance(retained, PointPattern):
        window = retained.window
        retained = retained.coords
    if window is None:
        raise ValueError("a window is needed for raw coordinates")
    r = np.asarray(r_grid, dtype=float)
    if len(retained) == 0:
        return ScdfEstimate(r, np.zeros_like(r), empty=True)
    d = np.sort(nearest_distances(np.asarray(retained), probes, window))
    H = np.searchsorted(d, r, side="right") / len(d)
    H = np.where(r > 0, H, 0.0)
    return ScdfEstimate(r, H)


@dataclass(frozen=True)
class CacheSizeSummary:
    values: np.ndarray
    pmf: np.ndarray
    mean: float
    variance: float
    samples: np.ndarray = field(repr=False)


def estimate_cache_size_distribution(placement: PlacementResult | Sequence[PlacementResult] | np.ndarray,
                                     mask=None) -> CacheSizeSummary:
    """Empirical law of ``C(x)`` pooled over nodes (and replications).

    Accepts a placement (optionally restricted by a node mask), a list of
    placements, or a raw array of cache sizes.
    """
    if isinstance(placement, PlacementResult):
        sizes = placement.cache_sizes if mask is None else placement.cache_sizes[mask]
    elif isinstance(placement, np.ndarray) or (placement and not isinstance(placement[0], PlacementResult)):
        sizes = np.asarray(placement)
    else:
        masks = mask if mask is not None else [None] * len(placement)
        sizes = np.concatenate([p.cache_sizes if m is None else p.cache_sizes[m] for p, m in zip(placement, masks)])
    sizes = np.asarray(sizes, dtype=np.int64)
    if len(sizes) == 0:
        raise ValueError("no cache size samples")
    counts = np.bincount(sizes)
    return CacheSizeSummary(np.arange(len(counts)), counts / len(sizes), float(sizes.mean()),
                            float(sizes.var()), sizes)


def estimate_violation_probability(samples, threshold: float, confidence: float = 0.95) -> EstimateWithCI:
    """Empirical ``P(C(x) > threshold)`` with a Wilson interval."""
    s = np.asarray(samples)
    n = len(s)
    if n == 0:
        raise ValueError("no cache size samples")
    k = int(np.count_nonzero(s > threshold))
    p = k / n
    z = _z(confidence)
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    se = math.sqrt(p * (1 - p) / n)
    return EstimateWithCI(p, min(p, max(0.0, centre - half)), max(p, min(1.0, centre + half)), se, n)


def required_cache_size(samples, coverage: float = 0.95) -> int:
    """Smallest integer ``C`` with ``P(C(x) <= C)`` at least the upper edge of a
    symmetric ``coverage`` band, i.e. ``1 - (1 - coverage) / 2``."""
    s = np.asarray(samples)
    if len(s) == 0:
        raise ValueError("no cache size samples")
    level = 1.0 - (1.0 - coverage) / 2.0
    values = np.sort(s)
    k = int(math.ceil(level * len(values) - 1e-9)) - 1
    return int(math.ceil(values[max(k, 0)]))


@dataclass
class PolicyRecord:
    """Per-replication output for one policy.

    ``hit[rep, k]`` is the mean receiver hit at radius ``radii[k]``;
    ``item_cover[rep, k, i]`` the fraction of receivers covered for item
    ``i``; ``probe_moments[rep, k]`` the mean and mean square of the
    per-receiver hit; ``item_scdf`` the same as ``item_cover`` measured on an
    independent receiver set through nearest-neighbour distances.
    """

    radii: np.ndarray
    hit: np.ndarray
    item_cover: np.ndarray
    probe_moments: np.ndarray
    item_scdf: np.ndarray | None
    retention: np.ndarray
    cache_sizes: list = field(default_factory=list)

    @property
    def pooled_cache_sizes(self) -> np.ndarray:
        return np.concatenate(self.cache_sizes) if self.cache_sizes else np.empty(0, dtype=np.int64)

    def hit_ci(self, k: int = 0, confidence: float = 0.95) -> EstimateWithCI:
        return mean_ci(self.hit[:, k], confidence, bounds=(0.0, 1.0))

    def hit_variance(self, k: int = 0) -> EstimateWithCI:
        """Across-receiver variance of the per-receiver hit, with replication SE."""
        mean = self.hit[:, k].mean()
        per_rep = self.probe_moments[:, k, 1] - 2 * mean * self.probe_moments[:, k, 0] + mean**2
        return mean_ci(per_rep)


def simulate(policies: Mapping[str, PlacementPolicy], demand: DemandModel, intensity: float,
             window: Window, radii: Sequence[float], plan: ReplicationPlan,
             scdf_probes: bool = False, pair_radius: float = 1.0) -> dict[str, PolicyRecord]:
    """Run every policy on shared mother patterns; see :class:`PolicyRecord`."""
    if not policies:
        raise ValueError("no policies to simulate")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("communication radii must be positive")
    M, reps, k = demand.M, plan.replications, plan.probes
    out = {
        name: PolicyRecord(
            radii=radii,
            hit=np.zeros((reps, len(radii))),
            item_cover=np.zeros((reps, len(radii), M)),
            probe_moments=np.zeros((reps, len(radii), 2)),
            item_scdf=np.zeros((reps, len(radii), M)) if scdf_probes else None,
            retention=np.zeros((reps, M)),
        )
        for name in policies
    }
    for rep in range(reps):
        streams = StreamFactory(plan.seed, rep)
        mother = sample_ppp(intensity, window, streams("mother"))
        pairs = PairIndex(mother, pair_radius)
        evaluated = mother.evaluation_mask()
        probes = window.uniform(streams("probes"), k, evaluation_only=True)
        cover = [coverage_matrix(probes, mother.coords, R, window) for R in radii]
        scdf_pts = window.uniform(streams("scdf-probes"), k, evaluation_only=True) if scdf_probes else None
        for name, policy in policies.items():
            placed = place_all_items(mother, policy, demand, StreamFactory(plan.seed, rep), pairs)
            rec = out[name]
            zf = placed.z.astype(np.float32)
            for a, A in enumerate(cover):
                covered = (A @ zf) > 0
                f = covered @ demand.pmf
                rec.hit[rep, a] = f.mean()
                rec.probe_moments[rep, a] = f.mean(), np.mean(f * f)
                rec.item_cover[rep, a] = covered.mean(axis=0)
            if scdf_probes:
                for i, idx in enumerate(placed.retained):
                    d = nearest_distances(mother.coords[idx], scdf_pts, window)
                    rec.item_scdf[rep, :, i] = (d[None, :] <= radii[:, None]).mean(axis=1)
            n_eval = max(int(evaluated.sum()), 1)
            rec.retention[rep] = placed.z[evaluated].sum(axis=0) / n_eval
            rec.cache_sizes.append(placed.cache_sizes[evaluated].astype(np.int64))
    return out


def estimate_hit_probability(policy: PlacementPolicy, demand: DemandModel, intensity: float,
                             window: Window, R: float, plan: ReplicationPlan) -> EstimateWithCI:
    """Receiver-averaged hit probability with a CI over replications."""
    rec = simulate({"policy": policy}, demand, intensity, window, [R], plan)["policy"]
    return rec.hit_ci(0, plan.confidence)
