"""Per-item parameter calibration and the cache-size / hit-probability sweep."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import optimize

from .analytics import (
    SccDistributionSpec,
    matern2_retention,
    scdf_independent,
    scdf_matern2,
    thinned_intensity,
)
from .demand import DemandModel
from .estimators import EstimateWithCI, ReplicationPlan, required_cache_size, simulate
from .placement import HardCore, Independent, MarkLaw, PlacementPolicy, SoftCore, SoftCoreParams
from .quadrature import QuadratureConfig, one_minus_exp_over
from .spatial import Window

POLICY_FAMILIES = ("independent", "matern2", "sscc")


class CalibrationError(ValueError):
    """Target retention not attainable; ``items`` lists the offending 1-based items."""

    def __init__(self, message, items=()):
        super().__init__(message)
        self.items = list(items)


def solve_matern_radius(p: float, intensity: float, side_length: float | None = None,
                        tol: float = 1e-12) -> float:
    """Exclusion radius whose Matérn II retention probability equals ``p``."""
    if not 0 < p <= 1:
        raise CalibrationError(f"retention target must lie in (0, 1], got {p}")
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    if p == 1:
        return 0.0
    if side_length is not None:
        floor = matern2_retention(intensity, 2 * side_length)
        if p <= floor:
            raise CalibrationError(f"retention {p} needs a radius beyond the window (minimum {floor:.3g})")
    # retention (1 - e^{-a}) / a is decreasing in a = λπδ²; 1/p bounds the root
    a = optimize.brentq(lambda a: one_minus_exp_over(a) - p, 0.0, 1.0 / p + 1.0, xtol=tol, rtol=1e-15)
    return float(np.sqrt(a / (np.pi * intensity)))


def soft_core_retention(mark_mean: float, intensity: float, scale: float = 1.0, p0: float = 1.0,
                        softness: float = 10.0, quad: QuadratureConfig | None = None) -> float:
    spec = SccDistributionSpec(intensity, MarkLaw(mark_mean, scale), p0, softness)
    return thinned_intensity(spec, quad) / intensity


def solve_mark_mean(p: float, intensity: float, scale: float = 1.0, p0: float = 1.0,
                    softness: float = 10.0, quad: QuadratureConfig | None = None) -> float:
    """Mean of the gamma mark law (fixed scale) whose soft-core retention is ``p``."""
    top = soft_core_retention(0.0, intensity, scale, p0, softness, quad)
    if p > top * (1 + 1e-12):
        raise CalibrationError(f"retention {p} exceeds the soft-core maximum {top:.6g}")
    if p >= top:
        return 0.0
    hi = 1.0
    while soft_core_retention(hi, intensity, scale, p0, softness, quad) > p:
        hi *= 2.0
        if hi > 1e4:
            raise CalibrationError(f"retention {p} too small to reach")
    f = lambda m: soft_core_retention(m, intensity, scale, p0, softness, quad) - p
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-12, rtol=1e-10))


def allocate_retention(demand: DemandModel, budget: float, exponent: float = 1.0,
                       ceiling: float = 1.0) -> np.ndarray:
    """Split a mean cache budget over items, ``p_i ∝ pmf_i**exponent``.

    Items that would exceed ``ceiling`` are clipped and the remainder is
    redistributed over the others.
    """
    M = demand.M
    if not 0 < budget <= M * ceiling + 1e-12:
        raise CalibrationError(f"budget {budget} outside (0, {M * ceiling}]")
    w = demand.pmf**exponent
    p = np.zeros(M)
    free = np.ones(M, dtype=bool)
    remaining = budget
    while True:
        p[free] = remaining * w[free] / w[free].sum()
        over = free & (p > ceiling)
        if not over.any():
            break
        p[over] = ceiling
        free &= ~over
        remaining = budget - ceiling * (~free).sum()
        if not free.any() or remaining <= 0:
            break
    return np.minimum(p, ceiling)


@dataclass(frozen=True)
class CalibrationTarget:
    mode: Literal["cache_budget", "hit_target"]
    value: float
    exponent: float = 1.0
    radius: float | None = None  # communication range, needed for hit targets

    def __post_init__(self):
        if self.mode not in ("cache_budget", "hit_target"):
            raise ValueError(f"unknown calibration mode {self.mode!r}")
        if self.mode == "hit_target":
            if not 0 < self.value < 1:
                raise ValueError("hit target must lie in (0, 1)")
            if self.radius is None or self.radius <= 0:
                raise ValueError("hit targets need a positive communication radius")
        elif self.value <= 0:
            raise ValueError("cache budget must be positive")


@dataclass(frozen=True)
class SoftCoreSettings:
    """How soft-core marks are derived from the hard-core radii.

    ``mark_rule="radius_ratio"`` uses gamma marks of mean ``ratio * r_i``;
    ``mark_rule="budget"`` inverts the soft-core intensity so each item
    meets its own retention target.
    """

    scale: float = 1.0
    p0: float = 1.0
    softness: float = 10.0
    mark_rule: Literal["radius_ratio", "budget"] = "radius_ratio"
    ratio: float = 0.7


def _policy_from_retention(family: str, p: np.ndarray, intensity: float,
                           soft: SoftCoreSettings, quad=None) -> PlacementPolicy:
    if family == "independent":
        return Independent(p)
    if family == "matern2":
        return HardCore([solve_matern_radius(pi, intensity) for pi in p])
    if family == "sscc":
        if soft.mark_rule == "radius_ratio":
            means = [soft.ratio * solve_matern_radius(pi, intensity) for pi in p]
        else:
            bad = []
            means = []
            for i, pi in enumerate(p, 1):
                try:
                    means.append(solve_mark_mean(pi, intensity, soft.scale, soft.p0, soft.softness, quad))
                except CalibrationError:
                    bad.append(i)
            if bad:
                raise CalibrationError(f"soft-core retention unattainable for items {bad}", bad)
        marks = tuple(MarkLaw(m, soft.scale) for m in means)
        return SoftCore(SoftCoreParams(marks, p0=soft.p0, softness=soft.softness))
    raise ValueError(f"unknown policy family {family!r}; expected one of {POLICY_FAMILIES}")


def _analytic_hit(family, p, demand, intensity, R, soft, quad):
    if family == "independent":
        return float(demand.pmf @ scdf_independent(R, p, intensity))
    policy = _policy_from_retention("matern2", p, intensity, soft, quad)
    h = [scdf_matern2(R, d, intensity, quad) for d in policy.radii]
    return float(demand.pmf @ np.asarray(h))


def solve_item_parameters(family: str, demand: DemandModel, target: CalibrationTarget, intensity: float,
                          soft: SoftCoreSettings | None = None,
                          quad: QuadratureConfig | None = None) -> tuple[np.ndarray, PlacementPolicy]:
    """Per-item retention targets and the policy realising them.

    In hit-target mode the budget is found by bisection on the analytic hit
    probability (exact for independent placement, contact-distribution
    approximation for the dependent policies).
    """
    soft = soft or SoftCoreSettings()
    if target.mode == "cache_budget":
        budget = target.value
    else:
        def gap(b):
            p = allocate_retention(demand, b, target.exponent)
            return _analytic_hit(family, p, demand, intensity, target.radius, soft, quad) - target.value
        top = float(demand.M)
        if gap(top) < 0:
            raise CalibrationError(f"hit target {target.value} unattainable")
        budget = optimize.brentq(gap, 1e-6, top, xtol=1e-9)
    p = allocate_retention(demand, budget, target.exponent)
    return p, _policy_from_retention(family, p, intensity, soft, quad)


@dataclass(frozen=True)
class TradeoffRow:
    policy: str
    scale: float
    hit: EstimateWithCI
    mean_cache: float
    n_req: int


@dataclass
class TradeoffCurve:
    policy: str
    radius: float
    rows: list[TradeoffRow] = field(default_factory=list)

    def sorted(self) -> "TradeoffCurve":
        return TradeoffCurve(self.policy, self.radius, sorted(self.rows, key=lambda r: r.scale))

    @property
    def monotone(self) -> bool:
        rows = sorted(self.rows, key=lambda r: r.mean_cache)
        hits = [r.hit.estimate for r in rows]
        return all(b >= a - 1e-12 for a, b in zip(hits, hits[1:]))

    def required_at(self, hit: float) -> float:
        """Piecewise-linear ``N_req`` at the given hit level (NaN outside the curve)."""
        rows = sorted(self.rows, key=lambda r: r.scale)
        h = np.maximum.accumulate([r.hit.estimate for r in rows])
        n = np.array([r.n_req for r in rows], dtype=float)
        if len(h) == 0 or hit < h[0] or hit > h[-1]:
            return float("nan")
        # first crossing on the running-maximum envelope
        k = int(np.searchsorted(h, hit, side="left"))
        if k == 0 or h[k] == hit:
            return float(n[k])
        t = (hit - h[k - 1]) / (h[k] - h[k - 1])
        return float(n[k - 1] + t * (n[k] - n[k - 1]))


def excess_ratios(curves: dict[str, TradeoffCurve], hit: float = 0.7, reference: str = "sscc") -> dict[str, float]:
    """``N_req(policy) / N_req(reference)`` at a matched hit probability."""
    base = curves[reference].required_at(hit)
    return {name: c.required_at(hit) / base for name, c in curves.items() if name != reference}


def sweep_tradeoff(families: Sequence[str], demand: DemandModel, intensity: float, window: Window, R: float,
                   budgets: Sequence[float], plan: ReplicationPlan, exponent: float = 1.0,
                   soft: SoftCoreSettings | None = None, coverage: float = 0.95,
                   quad: QuadratureConfig | None = None) -> dict[str, TradeoffCurve]:
    """Trace hit probability against required cache size for each policy family.

    Every budget is split over items with :func:`allocate_retention`, turned
    into each family's parameters, and all families are simulated on the
    same mother patterns.
    """
    if not families:
        raise ValueError("empty policy list")
    soft = soft or SoftCoreSettings()
    curves = {f: TradeoffCurve(f, R) for f in families}
    for budget in sorted(budgets):
        p = allocate_retention(demand, budget, exponent)
        policies = {f: _policy_from_retention(f, p, intensity, soft, quad) for f in families}
        recs = simulate(policies, demand, intensity, window, [R], plan)
        for f, rec in recs.items():
            sizes = rec.pooled_cache_sizes
            curves[f].rows.append(TradeoffRow(f, float(budget), rec.hit_ci(0, plan.confidence),
                                              float(sizes.mean()), required_cache_size(sizes, coverage)))
    return curves
