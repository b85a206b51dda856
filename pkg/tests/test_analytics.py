import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import stats

from sscc.analytics import (
    SccDistributionSpec,
    bernstein_violation_bound,
    cache_size_variance,
    ctpp_matern2,
    ctpp_sscc,
    hit_probability_analytic,
    hit_variance_analytic,
    kernel_integral,
    mark_expectation,
    matern2_retention,
    scdf_from_ctpp,
    scdf_independent,
    scdf_matern2,
    scdf_sscc,
    thinned_intensity,
)
from sscc.demand import DemandModel
from sscc.placement import MarkLaw, kernel_fc
from sscc.spatial import lens_area

LAM = 0.1
R_GRID = np.linspace(0.5, 10.0, 20)


def g(x):
    return -math.expm1(-x) / x if x else 1.0


def gamma_expectation(law, h):
    """Independent oracle: E[h(m)] against the scipy gamma density."""
    dist = stats.gamma(law.shape, scale=law.scale)
    hi = dist.ppf(1 - 1e-13)
    val, _ = sp_integrate.quad(lambda m: h(m) * dist.pdf(m), 0.0, hi, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


class UniformWeights:
    def cdf(self, w, mark):
        return np.clip(np.broadcast_to(w, np.broadcast_shapes(np.shape(w), np.shape(mark))), 0.0, 1.0)

    def pdf(self, w, mark):
        return np.ones(np.broadcast_shapes(np.shape(w), np.shape(mark)))


class TestKernelIntegral:
    @pytest.mark.parametrize("m, n, c", [(0.5, 1.0, 10.0), (2.0, 0.3, 1.0), (0.0, 0.0, 3.0), (1.0, 1.0, 100.0)])
    def test_against_2d_quadrature(self, m, n, c):
        s = m + n
        f = lambda rho, th: rho * kernel_fc(rho, m, n, c)
        inner, _ = sp_integrate.nquad(f, [[0.0, s], [0.0, 2 * math.pi]], opts={"epsabs": 1e-12, "epsrel": 1e-12}) \
            if s > 0 else (0.0, 0.0)
        outer, _ = sp_integrate.nquad(f, [[s, s + 60.0 / c], [0.0, 2 * math.pi]],
                                      opts={"epsabs": 1e-12, "epsrel": 1e-12})
        assert kernel_integral(m, n, c) == pytest.approx(inner + outer, rel=1e-8, abs=1e-10)

    def test_hard_kernel(self):
        assert kernel_integral(1.0, 0.5, np.inf) == pytest.approx(math.pi * 2.25)


class TestThinnedIntensity:
    @pytest.mark.parametrize("mbar", [0.3, 1.0, 2.5])
    def test_hard_degenerate_is_matern(self, mbar):
        spec = SccDistributionSpec(LAM, MarkLaw(mbar, 0.0), 1.0, np.inf)
        a = LAM * math.pi * (2 * mbar) ** 2
        assert thinned_intensity(spec) == pytest.approx(LAM * g(a), rel=1e-6)

    def test_soft_degenerate_closed_form(self):
        m, c = 1.2, 10.0
        spec = SccDistributionSpec(LAM, MarkLaw(m, 0.0), 1.0, c)
        area = math.pi * (2 * m) ** 2 + 2 * math.pi * (2 * m / c + 1 / c**2)
        assert thinned_intensity(spec) == pytest.approx(LAM * g(LAM * area), rel=1e-12)

    @pytest.mark.parametrize("mean, scale, c", [(2.0, 1.0, 10.0), (3.95, 1.0, 10.0), (2.0, 0.1, 100.0)])
    def test_gamma_marks_against_scipy(self, mean, scale, c):
        law = MarkLaw(mean, scale)
        spec = SccDistributionSpec(LAM, law, 1.0, c)

        def h(m):
            area = math.pi * (m * m + 2 * m * law.mean + law.second_moment) \
                + 2 * math.pi * ((m + law.mean) / c + 1 / c**2)
            return g(LAM * area)

        assert thinned_intensity(spec) == pytest.approx(LAM * gamma_expectation(law, h), rel=1e-6)

    def test_p0_factors_out(self):
        law = MarkLaw(2.0, 0.5)
        full = thinned_intensity(SccDistributionSpec(LAM, law, 1.0, 10.0))
        assert thinned_intensity(SccDistributionSpec(LAM, law, 0.3, 10.0)) == pytest.approx(0.3 * full, rel=1e-12)

    def test_general_weight_hook_agrees(self):
        law = MarkLaw(1.0, 0.5)
        plain = thinned_intensity(SccDistributionSpec(LAM, law, 1.0, 10.0))
        hooked = thinned_intensity(SccDistributionSpec(LAM, law, 1.0, 10.0, weights=UniformWeights()))
        assert hooked == pytest.approx(plain, rel=1e-6)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            SccDistributionSpec(0.0, MarkLaw(1.0))
        with pytest.raises(ValueError):
            SccDistributionSpec(LAM, MarkLaw(1.0), p0=1.5)

    def test_mark_expectation_mean(self):
        law = MarkLaw(2.0, 0.7)
        # the upper 1e-9 quantile tail is cut off, so agreement is at the quadrature tolerance
        assert mark_expectation(law, lambda m: m) == pytest.approx(2.0, rel=1e-6)
        assert mark_expectation(law, lambda m: m * m) == pytest.approx(law.second_moment, rel=1e-6)


class TestMaternCtpp:
    def test_small_radius_limit(self):
        assert ctpp_matern2(1.0, 1e-9, LAM) == pytest.approx(1.0)

    def test_unit_exponent(self):
        delta = 1 / math.sqrt(LAM * math.pi)
        assert ctpp_matern2(0.0, delta, LAM) == pytest.approx(1 - math.exp(-1), rel=1e-12)

    def test_equals_retention_at_zero(self):
        assert ctpp_matern2(0.0, 3.0, LAM) == pytest.approx(float(matern2_retention(LAM, 3.0)))

    @pytest.mark.parametrize("delta", [0.5, 2.0, 5.0])
    def test_nondecreasing_in_r(self, delta):
        eta = ctpp_matern2(np.linspace(0, 20, 400), delta, LAM)
        assert np.all(np.diff(eta) >= -1e-15)

    def test_rejects_nonpositive_intensity(self):
        with pytest.raises(ValueError):
            ctpp_matern2(1.0, 1.0, 0.0)


class TestSoftCtpp:
    @pytest.mark.parametrize("mbar", [0.5, 1.5, 4.0])
    def test_degenerate_reduces_to_matern(self, mbar):
        spec = SccDistributionSpec(LAM, MarkLaw(mbar, 0.0))
        np.testing.assert_allclose(ctpp_sscc(R_GRID, spec), ctpp_matern2(R_GRID, 2 * mbar, LAM), rtol=1e-6)

    def test_scalar_and_vector_agree(self):
        spec = SccDistributionSpec(LAM, MarkLaw(2.0, 1.0))
        assert ctpp_sscc(3.0, spec) == pytest.approx(float(ctpp_sscc(np.array([3.0]), spec)[0]), rel=1e-9)

    def test_large_r_asymptote(self):
        # far from the conditioning ball only half of each competitor disk is covered
        law = MarkLaw(2.0, 1.0)
        spec = SccDistributionSpec(LAM, law)

        def h(m):
            half = 0.5 * math.pi * (m * m + 2 * m * law.mean + law.second_moment)
            return g(LAM * half)

        limit = gamma_expectation(law, h)
        assert ctpp_sscc(1e6, spec) == pytest.approx(limit, rel=1e-6)
        # the lens deficit shrinks like delta^3 / r
        assert ctpp_sscc(1e3, spec) == pytest.approx(limit, rel=2e-3)

    def test_against_scipy_at_fixed_r(self):
        law = MarkLaw(3.0, 0.5)
        spec = SccDistributionSpec(LAM, law)
        r = 4.0

        def h(m):
            area = gamma_expectation(law, lambda n: math.pi * (m + n) ** 2 - lens_area(r, m + n))
            return g(LAM * area)

        assert ctpp_sscc(r, spec) == pytest.approx(gamma_expectation(law, h), rel=1e-5)

    def test_p0_scaling(self):
        law = MarkLaw(2.0, 1.0)
        a = ctpp_sscc(R_GRID, SccDistributionSpec(LAM, law, 1.0))
        b = ctpp_sscc(R_GRID, SccDistributionSpec(LAM, law, 0.5))
        np.testing.assert_allclose(b, 0.5 * a, rtol=1e-12)

    @pytest.mark.parametrize("mbar", [3.0, 3.95, 6.0])
    @pytest.mark.parametrize("beta", [0.1, 0.5, 1.0])
    def test_ordering_against_mean_mark_matern(self, mbar, beta):
        eta = ctpp_sscc(R_GRID, SccDistributionSpec(LAM, MarkLaw(mbar, beta)))
        assert np.all(eta >= ctpp_matern2(R_GRID, 2 * mbar, LAM) - 1e-9)

    def test_ordering_fails_for_small_marks(self):
        # the exponent is quadratic in the mark, so convexity alone does not carry the
        # bound; at small means it fails (known counterexample)
        eta = ctpp_sscc(R_GRID, SccDistributionSpec(LAM, MarkLaw(1.0, 1.0)))
        assert np.min(eta - ctpp_matern2(R_GRID, 2.0, LAM)) < -1e-3

    def test_scale_raises_ctpp_at_fixed_mean(self):
        lo = ctpp_sscc(R_GRID, SccDistributionSpec(LAM, MarkLaw(3.95, 0.1)))
        hi = ctpp_sscc(R_GRID, SccDistributionSpec(LAM, MarkLaw(3.95, 1.0)))
        assert np.all(hi >= lo)


class TestScdf:
    @pytest.mark.parametrize("R", [0.5, 3.0, 10.0])
    def test_unthinned_is_void_probability(self, R):
        H = scdf_from_ctpp(R, lambda r: np.ones_like(r), LAM)
        assert H == pytest.approx(1 - math.exp(-LAM * math.pi * R * R), rel=1e-9)

    def test_zero_radius(self):
        assert scdf_from_ctpp(0.0, lambda r: np.ones_like(r), LAM) == 0.0
        assert scdf_sscc(0.0, SccDistributionSpec(LAM, MarkLaw(1.0))) == 0.0

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            scdf_matern2(-1.0, 1.0, LAM)

    def test_independent_closed_form(self):
        assert scdf_independent(3.0, 0.4, LAM) == pytest.approx(1 - math.exp(-LAM * 0.4 * math.pi * 9))

    def test_monotone_and_bounded(self):
        spec = SccDistributionSpec(LAM, MarkLaw(2.0, 1.0))
        H = [scdf_sscc(R, spec) for R in (0.5, 1, 2, 4, 8, 16)]
        assert all(0 <= a <= b <= 1 for a, b in zip(H, H[1:]))
        Hm = [scdf_matern2(R, 3.0, LAM) for R in (0.5, 1, 2, 4, 8, 16)]
        assert all(0 <= a <= b <= 1 for a, b in zip(Hm, Hm[1:]))


class TestHitProbability:
    def test_constant_scdf(self):
        d = DemandModel(7, 0.4)
        assert hit_probability_analytic(d, [0.37] * 7, 3.0) == pytest.approx(0.37)

    def test_weighted_average(self):
        assert hit_probability_analytic(DemandModel(2, 1.0), [0.9, 0.3], 1.0) == pytest.approx(0.7)

    def test_callables(self):
        d = DemandModel(2, 1.0)
        assert hit_probability_analytic(d, [lambda R: 0.9, lambda R: 0.3], 1.0) == pytest.approx(0.7)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hit_probability_analytic(DemandModel(3, 0.0), [0.1, 0.2], 1.0)


class TestHitVariance:
    def test_all_covered(self):
        assert hit_variance_analytic(DemandModel(5, 0.3), np.ones(5)) == 0.0

    def test_single_item(self):
        assert hit_variance_analytic(DemandModel(1, 0.0), [0.5]) == pytest.approx(0.25)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            hit_variance_analytic(DemandModel(2, 0.0), [0.5, 1.2])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=20))
    def test_zero_iff_degenerate(self, h):
        v = hit_variance_analytic(DemandModel(len(h), 0.5), h)
        assert v >= 0
        assert (v == 0) == all(x in (0.0, 1.0) for x in h)


class TestBernstein:
    def test_at_mean(self):
        assert bernstein_violation_bound(10.0, 10.0, 2.0) == 1.0

    def test_substitution(self):
        assert bernstein_violation_bound(10.0, 13.0, 2.0) == pytest.approx(math.exp(-3.0))

    def test_vacuous_rejected(self):
        with pytest.raises(ValueError):
            bernstein_violation_bound(10.0, 9.0, 2.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 100), st.floats(0, 50), st.floats(0, 50))
    def test_in_unit_interval(self, N, t, var):
        b = bernstein_violation_bound(N, N + t, var)
        assert 0.0 <= b <= 1.0

    def test_cache_size_variance(self):
        assert cache_size_variance([0.5, 0.1, 1.0]) == pytest.approx(0.25 + 0.09)


def simulated_scdf(law, R, reps=40, probes=2000, seed=3):
    from sscc.estimators import estimate_scdf
    from sscc.placement import SoftCoreParams, thin_sscc
    from sscc.spatial import Window, sample_ppp
    from sscc.streams import stream

    w = Window(100.0, "torus")
    params = SoftCoreParams((law,), softness=10.0)
    H = []
    for rep in range(reps):
        mother = sample_ppp(LAM, w, stream(seed, rep, 0, "mother"))
        probes_xy = w.uniform(stream(seed, rep, 0, "probes"), probes)
        kept = mother.coords[thin_sscc(mother, params, 1, stream(seed, rep, 1, "thin"))]
        H.append(estimate_scdf(kept, probes_xy, [R], w).H[0])
    return float(np.mean(H))


def reference_item1_law(R=3.0):
    from sscc.config import ExperimentConfig
    from sscc.validation import operating_policies

    return operating_policies(ExperimentConfig(), R)[1]["sscc"].params.marks[0]


@pytest.mark.slow
class TestScdfAgainstSimulation:
    @pytest.mark.xfail(strict=True, reason="the contact-distribution construction is an approximation; "
                       "with the pair lens it overshoots the simulated value by about 0.03 here")
    def test_reference_item_pair_lens(self):
        law = reference_item1_law()
        assert abs(scdf_sscc(3.0, SccDistributionSpec(LAM, law)) - simulated_scdf(law, 3.0)) < 0.02

    def test_reference_item_neighbour_lens(self):
        law = reference_item1_law()
        H = scdf_sscc(3.0, SccDistributionSpec(LAM, law), lens="neighbour")
        assert abs(H - simulated_scdf(law, 3.0)) < 0.02

    def test_pair_lens_is_an_upper_approximation(self):
        law = reference_item1_law()
        assert scdf_sscc(3.0, SccDistributionSpec(LAM, law)) > simulated_scdf(law, 3.0)


def test_lens_option_validated():
    with pytest.raises(ValueError):
        ctpp_sscc(1.0, SccDistributionSpec(LAM, MarkLaw(1.0)), lens="both")
