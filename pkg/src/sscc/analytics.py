"""Closed-form and quadrature-based quantities for the thinned node processes.

Mark expectations are taken in quantile space, ``E[h(m)] = ∫ h(F^{-1}(u)) du``
over ``u in [0, 1 - MARK_TAIL]``, which removes the density singularity of
gamma laws with shape below one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .demand import DemandModel
from .placement import MarkLaw
from .quadrature import QuadratureConfig, integrate, one_minus_exp_over
from .spatial import lens_area

MARK_TAIL = 1e-9


class WeightLaw(Protocol):
    """Weight distribution on ``[0, 1]`` that may depend on the mark."""

    def cdf(self, w: np.ndarray, mark: np.ndarray) -> np.ndarray: ...

    def pdf(self, w: np.ndarray, mark: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class SccDistributionSpec:
    intensity: float
    marks: MarkLaw
    p0: float = 1.0
    softness: float = 10.0
    weights: Optional[WeightLaw] = None  # None: U[0, 1], independent of the mark

    def __post_init__(self):
        if not (np.isfinite(self.intensity) and self.intensity > 0):
            raise ValueError(f"intensity must be positive, got {self.intensity}")
        if not 0 < self.p0 <= 1:
            raise ValueError(f"p0 must lie in (0, 1], got {self.p0}")
        if not self.softness > 0:
            raise ValueError(f"softness must be positive, got {self.softness}")


def mark_expectation(law: MarkLaw, h: Callable[[np.ndarray], np.ndarray],
                     quad: QuadratureConfig | None = None) -> np.ndarray | float:
    """``E[h(m)]`` for ``m ~ law``; ``h`` must accept an array of marks."""
    if law.degenerate:
        out = np.asarray(h(np.array([law.mean])), dtype=float)[0]
        return out if np.ndim(out) else float(out)
    top = 1.0 - MARK_TAIL
    res = integrate(lambda u: h(law.ppf(u)), 0.0, top, quad)
    return res.value / top


def kernel_integral(m, n, softness):
    """``∫_{R^2} f_c(|x|, m, n) dx`` by radial integration of the kernel."""
    s = np.asarray(m, dtype=float) + np.asarray(n, dtype=float)
    out = np.pi * s**2
    if np.isfinite(softness):
        out = out + 2 * np.pi * (s / softness + 1.0 / softness**2)
    return out


def _mean_interaction_area(m, law: MarkLaw, softness):
    # E_n over the neighbour mark of the kernel integral, in closed form
    m = np.asarray(m, dtype=float)
    out = np.pi * (m**2 + 2 * m * law.mean + law.second_moment)
    if np.isfinite(softness):
        out = out + 2 * np.pi * ((m + law.mean) / softness + 1.0 / softness**2)
    return out


def thinned_intensity(spec: SccDistributionSpec, quad: QuadratureConfig | None = None) -> float:
    """Intensity of the soft-core thinned process."""
    lam = spec.intensity
    law = spec.marks
    if spec.weights is None:
        def h(m):
            return one_minus_exp_over(lam * _mean_interaction_area(m, law, spec.softness))
        return lam * spec.p0 * float(mark_expectation(law, h, quad))
    return lam * spec.p0 * float(_thinned_intensity_general(spec, quad))


def _thinned_intensity_general(spec, quad):
    lam, law, c, nu = spec.intensity, spec.marks, spec.softness, spec.weights

    def survival(m):
        out = np.empty(len(m))
        for k, mk in enumerate(m):
            def over_w(w):
                def over_n(n):
                    return nu.cdf(w[None, :], n[:, None]) * kernel_integral(mk, n, c)[:, None]
                exposure = np.atleast_1d(mark_expectation(law, over_n, quad))
                return np.exp(-lam * exposure) * nu.pdf(w, np.full_like(w, mk))
            out[k] = integrate(over_w, 0.0, 1.0, quad).value
        return out

    return mark_expectation(law, survival, quad)


def matern2_retention(intensity: float, radius):
    """Retention probability of Matérn II thinning: ``(1 - e^{-a}) / a``, ``a = λπδ²``."""
    return one_minus_exp_over(intensity * np.pi * np.asarray(radius, dtype=float) ** 2)


def ctpp_matern2(r, radius: float, intensity: float):
    """Conditional thinning Palm probability for Matérn II thinning."""
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    exposed = np.pi * radius**2 - lens_area(r, radius)
    return one_minus_exp_over(intensity * np.maximum(exposed, 0.0))


def ctpp_sscc(r, spec: SccDistributionSpec, quad: QuadratureConfig | None = None,
              lens: str = "pair"):
    """Conditional thinning Palm probability for soft-core thinning.

    Uses the hard-interaction competitor measure
    ``λ E_n[π(m+n)² - l₂(r, m+n)]`` and averages ``(1 - e^{-q}) / q`` over
    the mark of the tagged point. With degenerate marks ``m̄`` this is
    exactly :func:`ctpp_matern2` at radius ``2 m̄``.

    ``lens="neighbour"`` subtracts ``l₂(r, n)`` instead, the competitor
    measure written with the neighbour mark alone. It does not reduce to the
    Matérn II form and is kept for diagnostics.
    """
    if lens not in ("pair", "neighbour"):
        raise ValueError(f"lens must be 'pair' or 'neighbour', got {lens!r}")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    lam, law = spec.intensity, spec.marks

    def exposure(m):
        # (k,) marks -> (k, len(r)) competitor areas
        m = np.asarray(m, dtype=float)

        def over_n(n):
            s = m[None, :, None] + n[:, None, None]
            reach = s if lens == "pair" else np.broadcast_to(n[:, None, None], s.shape)
            area = np.pi * s**2 - lens_area(r_arr[None, None, :], reach)
            return area.reshape(len(n), -1)

        return np.reshape(mark_expectation(law, over_n, quad), (len(m), len(r_arr)))

    def h(m):
        return one_minus_exp_over(lam * np.maximum(exposure(m), 0.0))

    out = spec.p0 * np.atleast_1d(mark_expectation(law, h, quad))
    return out if np.ndim(r) else float(out[0])


def scdf_from_ctpp(R: float, ctpp: Callable[[np.ndarray], np.ndarray], intensity: float,
                   quad: QuadratureConfig | None = None) -> float:
    """Contact distribution ``1 - exp(-∫_0^R 2πrλ η(r) dr)``."""
    if R < 0:
        raise ValueError("R must be non-negative")
    if R == 0:
        return 0.0
    res = integrate(lambda r: 2 * np.pi * r * intensity * np.asarray(ctpp(r), dtype=float), 0.0, R, quad)
    return float(-np.expm1(-res.value))


def scdf_independent(R, q: float, intensity: float):
    """Contact distribution of an independently ``q``-thinned Poisson process."""
    return -np.expm1(-intensity * q * np.pi * np.asarray(R, dtype=float) ** 2)


def scdf_matern2(R: float, radius: float, intensity: float, quad=None) -> float:
    return scdf_from_ctpp(R, lambda r: ctpp_matern2(r, radius, intensity), intensity, quad)


def scdf_sscc(R: float, spec: SccDistributionSpec, quad=None, lens: str = "pair") -> float:
    return scdf_from_ctpp(R, lambda r: ctpp_sscc(r, spec, quad, lens), spec.intensity, quad)


def hit_probability_analytic(demand: DemandModel, per_item_scdf: Sequence, R: float) -> float:
    """Demand-weighted contact distribution at ``R``.

    ``per_item_scdf`` holds either callables ``H_i(R)`` or already evaluated
    values.
    """
    if len(per_item_scdf) != demand.M:
        raise ValueError(f"expected {demand.M} per-item SCDFs, got {len(per_item_scdf)}")
    h = np.array([H(R) if callable(H) else H for H in per_item_scdf], dtype=float)
    return float(demand.pmf @ h)


def hit_variance_analytic(demand: DemandModel, per_item_H_at_R: Sequence[float]) -> float:
    """Across-receiver variance of the hit indicator sum, items independent."""
    h = np.asarray(per_item_H_at_R, dtype=float)
    if h.shape != (demand.M,):
        raise ValueError(f"expected {demand.M} values, got shape {h.shape}")
    if np.any((h < 0) | (h > 1)):
        raise ValueError("SCDF values must lie in [0, 1]")
    return float(np.sum(demand.pmf**2 * h * (1 - h)))


def cache_size_variance(retention: Sequence[float]) -> float:
    p = np.asarray(retention, dtype=float)
    return float(np.sum(p * (1 - p)))


def bernstein_violation_bound(expected_size: float, threshold: float, variance: float) -> float:
    """Upper bound on ``P(C(x) > threshold)`` for the cache content count."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    t = threshold - expected_size
    if t < 0:
        raise ValueError("threshold below the expected cache size; the bound is vacuous")
    if t == 0:
        return 1.0
    denom = variance + t / 3.0
    if denom == 0.0:  # t underflowed with zero variance
        return 0.0
    return float(np.exp(-(t * t) / denom))
