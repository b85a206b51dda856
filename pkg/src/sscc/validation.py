"""Cross-module oracle checks: closed forms against Monte Carlo and against each other.

Each check returns :class:`Check` rows (name, expected, observed, tolerance,
verdict). ``run_validate`` strings the checks together for the command line;
the acceptance tests call the individual functions at their own effort level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytics import (
    SccDistributionSpec,
    bernstein_violation_bound,
    cache_size_variance,
    ctpp_matern2,
    ctpp_sscc,
    hit_variance_analytic,
    matern2_retention,
    thinned_intensity,
)
from .calibration import SoftCoreSettings, _policy_from_retention, allocate_retention
from .config import ExperimentConfig
from .demand import DemandModel
from .estimators import ReplicationPlan, estimate_violation_probability, mean_ci, simulate
from .experiment import reference_budget
from .placement import (
    HardCore,
    MarkLaw,
    SoftCore,
    SoftCoreParams,
    kernel_fc,
    soft_core_survivors,
    thin_sscc,
)
from .spatial import PairIndex, Window, sample_ppp
from .streams import stream

TORUS = Window(100.0, "torus")


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    observed: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return (f"{verdict}  {self.name}  expected={self.expected:.6g}  observed={self.observed:.6g}"
                f"  tol={self.tolerance:.3g}{extra}")


def mc_retention(spec: SccDistributionSpec, reps: int, seed: int, window: Window = TORUS) -> tuple[float, float]:
    """Monte Carlo retention probability of soft-core thinning (ratio estimator, SE over replications)."""
    params = SoftCoreParams((spec.marks,), p0=spec.p0, softness=spec.softness)
    kept = np.zeros(reps)
    total = np.zeros(reps)
    for rep in range(reps):
        mother = sample_ppp(spec.intensity, window, stream(seed, rep, 0, "mother"))
        idx = thin_sscc(mother, params, 1, stream(seed, rep, 1, "thin"))
        if window.edge_mode == "torus":
            kept[rep], total[rep] = len(idx), len(mother)
        else:
            inside = mother.evaluation_mask()
            kept[rep], total[rep] = inside[idx].sum(), inside.sum()
    ratio = kept.sum() / total.sum()
    # delta-method SE of a ratio of sums
    resid = kept - ratio * total
    se = math.sqrt(np.sum(resid**2) / (reps * (reps - 1))) / total.mean() if reps > 1 else 0.0
    return float(ratio), float(se)


def reference_mark_mean(intensity: float = 0.1, item_retention: float = 0.1, ratio: float = 0.7) -> float:
    """Mean mark ``ratio * r`` for the hard-core radius ``r`` with the given retention."""
    from .calibration import solve_matern_radius

    return ratio * solve_matern_radius(item_retention, intensity)


def intensity_specs(intensity: float = 0.1) -> list[tuple[str, SccDistributionSpec]]:
    """Specs for the intensity oracle: the reference experiment's mark law and a
    fixed-mean family across mark scales and kernel softness."""
    ref = reference_mark_mean(intensity)
    out = [("reference marks gamma(0.7 r, 1), c=10", SccDistributionSpec(intensity, MarkLaw(ref, 1.0), 1.0, 10.0))]
    for c in (100.0, 10.0):
        for beta in (0.0, 0.1, 1.0):
            out.append((f"mean 2, scale {beta}, c={c:g}", SccDistributionSpec(intensity, MarkLaw(2.0, beta), 1.0, c)))
    return out


def check_intensity(specs, reps: int = 300, seed: int = 11, rel_tol: float = 0.02) -> list[Check]:
    rows = []
    for k, (label, spec) in enumerate(specs):
        analytic = thinned_intensity(spec)
        p_hat, se = mc_retention(spec, reps, seed + k)
        observed = p_hat * spec.intensity
        rel = abs(observed - analytic) / analytic
        rows.append(Check(f"intensity[{label}]", analytic, observed, rel_tol, rel <= rel_tol,
                          f"rel_err={rel:.4f} se={se * spec.intensity:.3g}"))
    return rows


def check_matern_reduction(intensity: float = 0.1, mark_mean: float = 1.0, reps: int = 300,
                           seed: int = 29) -> list[Check]:
    closed = float(matern2_retention(intensity, 2 * mark_mean))
    spec = SccDistributionSpec(intensity, MarkLaw(mark_mean, 0.0), 1.0, np.inf)
    quad = thinned_intensity(spec) / intensity
    # huge softness instead of the exact indicator exercises the soft branch
    soft = SccDistributionSpec(intensity, MarkLaw(mark_mean, 0.0), 1.0, 1e6)
    sim, se = mc_retention(soft, reps, seed)
    return [
        Check("matern_reduction[quadrature]", closed, quad, 1e-6, abs(quad - closed) / closed <= 1e-6),
        Check("matern_reduction[simulation]", closed, sim, 0.02, abs(sim - closed) / closed <= 0.02,
              f"se={se:.3g}"),
    ]


def check_ctpp_ordering(intensity: float, mark_means: Sequence[float], scales=(0.1, 0.5, 1.0),
                        r_grid=None, tol: float = 1e-9) -> list[Check]:
    """Soft-core CTPP against the hard-core CTPP at exclusion ``2 * mean mark``."""
    r_grid = np.linspace(0.5, 10.0, 20) if r_grid is None else np.asarray(r_grid)
    rows = []
    for mbar in mark_means:
        for beta in scales:
            spec = SccDistributionSpec(intensity, MarkLaw(mbar, beta))
            gap = np.asarray(ctpp_sscc(r_grid, spec)) - ctpp_matern2(r_grid, 2 * mbar, intensity)
            worst = float(gap.min())
            rows.append(Check(f"ctpp_ordering[mean={mbar:.4g}, scale={beta}]", 0.0, worst, tol, worst >= -tol,
                              f"argmin r={r_grid[int(gap.argmin())]:.3g}"))
    return rows


def check_packing(intensity: float = 0.1, mark_mean: float = 2.0, softness: float = 100.0,
                  scales=(0.0, 0.1, 1.0), reps: int = 400, seed: int = 41) -> list[Check]:
    """Retained intensity nondecreasing in the mark scale at fixed mean mark."""
    sims = []
    for k, beta in enumerate(scales):
        spec = SccDistributionSpec(intensity, MarkLaw(mark_mean, beta), 1.0, softness)
        sims.append(mc_retention(spec, reps, seed + k))
    rows = []
    for (b0, (p0, s0)), (b1, (p1, s1)) in zip(zip(scales, sims), zip(scales[1:], sims[1:])):
        rows.append(Check(f"packing[scale {b0} -> {b1}]", p0 * intensity, p1 * intensity, 0.0, p1 >= p0,
                          f"diff_se={math.hypot(s0, s1) * intensity:.3g}"))
    return rows


def product_configurations(seed: int = 5, count: int = 3, n: int = 8):
    """Small fixed configurations (coordinates, marks, weights) for the product oracle."""
    rng = stream(seed, 0, 0, "product")
    return [(rng.uniform(0, 2.5, size=(n, 2)), rng.uniform(0.1, 0.6, size=n), rng.random(n)) for _ in range(count)]


def neighbour_product(coords, marks, weights, softness, p0):
    """Retention probability of every point as the explicit product over neighbours."""
    n = len(coords)
    out = np.empty(n)
    for a in range(n):
        prod = p0
        for b in range(n):
            if a == b:
                continue
            d = float(np.hypot(*(coords[a] - coords[b])))
            loses = weights[a] > weights[b] or (weights[a] == weights[b] and a > b)
            prod *= 1.0 - loses * kernel_fc(d, marks[a], marks[b], softness)
        out[a] = prod
    return out


def check_neighbour_product(draws: int = 100_000, seed: int = 5, softness: float = 10.0, p0s=(1.0, 0.8)) -> list[Check]:
    rows = []
    for k, (coords, marks, weights) in enumerate(product_configurations(seed)):
        i, j = np.triu_indices(len(coords), 1)
        d = np.hypot(*(coords[i] - coords[j]).T)
        for p0 in p0s:
            exact = neighbour_product(coords, marks, weights, softness, p0)
            alive = soft_core_survivors(len(coords), i, j, d, marks, weights, softness, p0,
                                        stream(seed, k, 1, f"product-{p0}"), draws=draws)
            freq = alive.mean(axis=0)
            se = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / draws)
            z = np.abs(freq - exact) / se
            worst = int(z.argmax())
            rows.append(Check(f"neighbour_product[config {k}, p0={p0}]", float(exact[worst]), float(freq[worst]),
                              3.0, bool(np.all(z <= 3.0)), f"max|z|={z.max():.2f}"))
    return rows


def operating_policies(cfg: ExperimentConfig, R: float):
    """Policies at the budget where independent placement reaches the hit level.

    ``sscc`` follows the configured mark rule; ``sscc_matched`` inverts the
    soft-core intensity so its mean cache size equals the independent one.
    """
    p = allocate_retention(cfg.demand_model, reference_budget(cfg, R), cfg.policies.exponent)
    lam = cfg.network.intensity
    soft = cfg.soft
    matched = SoftCoreSettings(soft.scale, soft.p0, soft.softness, "budget", soft.ratio)
    return p, {
        "independent": _policy_from_retention("independent", p, lam, soft),
        "matern2": _policy_from_retention("matern2", p, lam, soft),
        "sscc": _policy_from_retention("sscc", p, lam, soft),
        "sscc_matched": _policy_from_retention("sscc", p, lam, matched),
    }


def item_retention(policy, intensity: float) -> np.ndarray:
    if isinstance(policy, SoftCore):
        prm = policy.params
        return np.array([thinned_intensity(SccDistributionSpec(intensity, law, prm.p0, prm.softness)) / intensity
                         for law in prm.marks])
    if isinstance(policy, HardCore):
        return np.asarray(matern2_retention(intensity, policy.radii))
    return np.asarray(policy.probabilities)


def simulate_operating_point(cfg: ExperimentConfig, R: float, plan: ReplicationPlan | None = None):
    p, policies = operating_policies(cfg, R)
    recs = simulate(policies, cfg.demand_model, cfg.network.intensity, cfg.window, [R], plan or cfg.plan,
                    scdf_probes=True)
    return policies, recs


def check_hit_scdf_identity(recs, R: float, demand: DemandModel) -> list[Check]:
    rows = []
    for name, rec in recs.items():
        diff = rec.hit[:, 0] - rec.item_scdf[:, 0, :] @ demand.pmf
        est = mean_ci(diff)
        z = abs(est.estimate) / est.stderr if est.stderr > 0 else (0.0 if est.estimate == 0 else np.inf)
        rows.append(Check(f"hit_equals_mean_scdf[{name}, R={R:g}]", 0.0, est.estimate, 3.0, z <= 3.0,
                          f"|z|={z:.2f} hit={rec.hit[:, 0].mean():.4f}"))
    return rows


def check_hit_variance(recs, R: float, demand: DemandModel) -> list[Check]:
    rows = []
    for name, rec in recs.items():
        H = rec.item_scdf[:, 0, :].mean(axis=0)
        analytic = hit_variance_analytic(demand, H)
        emp = rec.hit_variance(0)
        z = abs(emp.estimate - analytic) / emp.stderr
        rows.append(Check(f"hit_variance[{name}, R={R:g}]", analytic, emp.estimate, 3.0, z <= 3.0,
                          f"|z|={z:.2f} se={emp.stderr:.3g}"))
    return rows


def check_variance_ordering(recs, R: float, demand: DemandModel, base="independent",
                            other="sscc_matched") -> list[Check]:
    """Soft-core hit variance below independent placement at equal mean cache size."""
    out = []
    for kind in ("analytic", "empirical"):
        if kind == "analytic":
            v = {k: hit_variance_analytic(demand, recs[k].item_scdf[:, 0, :].mean(axis=0)) for k in (base, other)}
        else:
            v = {k: recs[k].hit_variance(0).estimate for k in (base, other)}
        sizes = {k: recs[k].pooled_cache_sizes.mean() for k in (base, other)}
        out.append(Check(f"variance_ordering[{kind}, R={R:g}]", v[base], v[other], 0.0, v[other] < v[base],
                         f"mean_cache {base}={sizes[base]:.3f} {other}={sizes[other]:.3f}"))
    return out


def check_bernstein(policy, sizes, intensity: float, label: str = "sscc", extra: int = 5) -> list[Check]:
    p = item_retention(policy, intensity)
    N = float(p.sum())
    var = cache_size_variance(p)
    rows = []
    for C in range(math.ceil(N) + 1, math.ceil(N) + extra + 1):
        bound = bernstein_violation_bound(N, C, var)
        emp = estimate_violation_probability(sizes, C)
        rows.append(Check(f"bernstein[{label}, C={C}]", bound, emp.estimate, 0.0, emp.estimate <= bound,
                          f"N={N:.3f} var={var:.3f} n={emp.n}"))
    return rows


def run_validate(cfg: ExperimentConfig) -> list[Check]:
    """The oracle suite used by ``sscc validate``."""
    lam = cfg.network.intensity
    reps = cfg.run.replications
    checks: list[Check] = []
    checks += check_matern_reduction(lam, reps=reps)
    checks += check_intensity(intensity_specs(lam), reps=reps, seed=cfg.run.seed % 10_000 + 11)
    checks += check_ctpp_ordering(lam, [reference_mark_mean(lam), 3.0])
    checks += check_neighbour_product(draws=100_000, seed=cfg.run.seed % 10_000 + 5)
    for R in cfg.network.radii:
        policies, recs = simulate_operating_point(cfg, R)
        checks += check_hit_scdf_identity(recs, R, cfg.demand_model)
        checks += check_hit_variance(recs, R, cfg.demand_model)
        checks += check_variance_ordering(recs, R, cfg.demand_model)
        checks += check_bernstein(policies["sscc"], recs["sscc"].pooled_cache_sizes, lam, f"sscc R={R:g}")
    return checks
