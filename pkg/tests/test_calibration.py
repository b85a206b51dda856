import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sscc.analytics import MarkLaw, SccDistributionSpec, matern2_retention, scdf_independent
from sscc.calibration import (
    CalibrationError,
    CalibrationTarget,
    SoftCoreSettings,
    TradeoffCurve,
    TradeoffRow,
    allocate_retention,
    excess_ratios,
    soft_core_retention,
    solve_item_parameters,
    solve_mark_mean,
    solve_matern_radius,
    sweep_tradeoff,
)
from sscc.demand import DemandModel
from sscc.estimators import EstimateWithCI, ReplicationPlan
from sscc.placement import HardCore, Independent, SoftCore
from sscc.spatial import Window
from sscc.validation import mc_retention

LAM = 0.1


class TestMaternRadius:
    def test_full_retention(self):
        assert solve_matern_radius(1.0, LAM) == 0.0

    def test_unit_exponent(self):
        assert solve_matern_radius(1 - math.exp(-1), LAM) == pytest.approx(1 / math.sqrt(LAM * math.pi), rel=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.01, 0.999))
    def test_round_trip(self, p):
        assert abs(float(matern2_retention(LAM, solve_matern_radius(p, LAM))) - p) < 1e-9

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.2])
    def test_out_of_range(self, p):
        with pytest.raises(CalibrationError):
            solve_matern_radius(p, LAM)

    def test_window_bound(self):
        floor = float(matern2_retention(LAM, 2 * 10.0))
        with pytest.raises(CalibrationError):
            solve_matern_radius(floor / 2, LAM, side_length=10.0)
        assert solve_matern_radius(floor * 2, LAM, side_length=10.0) < 20.0


class TestMarkMean:
    @pytest.mark.parametrize("p", [0.05, 0.2, 0.6])
    def test_analytic_round_trip(self, p):
        m = solve_mark_mean(p, LAM)
        assert soft_core_retention(m, LAM) == pytest.approx(p, rel=1e-6)

    @pytest.mark.slow
    def test_simulated_round_trip(self):
        m = solve_mark_mean(0.2, LAM)
        sim, _ = mc_retention(SccDistributionSpec(LAM, MarkLaw(m, 1.0)), 100, 3)
        assert sim == pytest.approx(0.2, rel=0.03)

    def test_unreachable(self):
        top = soft_core_retention(0.0, LAM)
        assert top < 1.0  # the kernel tail deletes even with zero marks
        with pytest.raises(CalibrationError):
            solve_mark_mean(min(1.0, top * 1.01), LAM)

    def test_top_gives_zero_mean(self):
        assert solve_mark_mean(soft_core_retention(0.0, LAM), LAM) == 0.0


class TestAllocation:
    def test_sums_to_budget(self):
        p = allocate_retention(DemandModel(100, 0.1), 12.5)
        assert p.sum() == pytest.approx(12.5, rel=1e-12)
        assert np.all(np.diff(p) <= 0)

    def test_uniform_demand(self):
        np.testing.assert_allclose(allocate_retention(DemandModel(8, 0.0), 2.0), 0.25)

    def test_clipping_redistributes(self):
        d = DemandModel(4, 2.0)
        p = allocate_retention(d, 3.0)
        assert p.max() == 1.0 and p.sum() == pytest.approx(3.0)
        free = p < 1
        np.testing.assert_allclose(p[free] / p[free].sum(), d.pmf[free] / d.pmf[free].sum())

    def test_exponent_zero_is_uniform(self):
        np.testing.assert_allclose(allocate_retention(DemandModel(5, 1.0), 2.0, exponent=0.0), 0.4)

    @pytest.mark.parametrize("budget", [0.0, 101.0])
    def test_infeasible(self, budget):
        with pytest.raises(CalibrationError):
            allocate_retention(DemandModel(100, 0.1), budget)


class TestItemParameters:
    def test_single_item_full_budget(self):
        target = CalibrationTarget("cache_budget", 1.0)
        p, pol = solve_item_parameters("independent", DemandModel(1, 0.0), target, LAM)
        assert p[0] == 1.0 and pol.probabilities[0] == 1.0
        _, hc = solve_item_parameters("matern2", DemandModel(1, 0.0), target, LAM)
        assert hc.radii[0] == 0.0

    def test_uniform_demand_split(self):
        p, _ = solve_item_parameters("independent", DemandModel(10, 0.0), CalibrationTarget("cache_budget", 3.0), LAM)
        np.testing.assert_allclose(p, 0.3)

    def test_reference_marks_are_seven_tenths_of_radius(self):
        d = DemandModel(100, 0.1)
        p, pol = solve_item_parameters("sscc", d, CalibrationTarget("cache_budget", 5.0), LAM)
        _, hc = solve_item_parameters("matern2", d, CalibrationTarget("cache_budget", 5.0), LAM)
        means = np.array([law.mean for law in pol.params.marks])
        np.testing.assert_allclose(means, 0.7 * hc.radii, rtol=1e-12)
        assert all(law.scale == 1.0 for law in pol.params.marks)

    @pytest.mark.parametrize("rule", ["radius_ratio", "budget"])
    def test_marks_nondecreasing_in_item(self, rule):
        soft = SoftCoreSettings(mark_rule=rule)
        _, pol = solve_item_parameters("sscc", DemandModel(30, 0.8), CalibrationTarget("cache_budget", 3.0), LAM, soft)
        means = [law.mean for law in pol.params.marks]
        assert np.all(np.diff(means) >= 0)

    def test_budget_rule_meets_retention(self):
        soft = SoftCoreSettings(mark_rule="budget")
        p, pol = solve_item_parameters("sscc", DemandModel(5, 0.5), CalibrationTarget("cache_budget", 1.0), LAM, soft)
        got = [soft_core_retention(law.mean, LAM) for law in pol.params.marks]
        np.testing.assert_allclose(got, p, rtol=1e-6)

    def test_budget_rule_reports_items(self):
        soft = SoftCoreSettings(mark_rule="budget")
        with pytest.raises(CalibrationError) as exc:
            solve_item_parameters("sscc", DemandModel(4, 3.0), CalibrationTarget("cache_budget", 3.9), LAM, soft)
        assert exc.value.items and exc.value.items[0] == 1

    def test_hit_target(self):
        d = DemandModel(100, 0.1)
        p, pol = solve_item_parameters("independent", d, CalibrationTarget("hit_target", 0.7, radius=10.0), LAM)
        assert float(d.pmf @ scdf_independent(10.0, p, LAM)) == pytest.approx(0.7, abs=1e-8)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            solve_item_parameters("matern3", DemandModel(2, 0.0), CalibrationTarget("cache_budget", 1.0), LAM)

    @pytest.mark.parametrize("kw", [dict(mode="x", value=1.0), dict(mode="hit_target", value=1.2, radius=1.0),
                                    dict(mode="hit_target", value=0.5), dict(mode="cache_budget", value=0.0)])
    def test_target_validation(self, kw):
        with pytest.raises(ValueError):
            CalibrationTarget(**kw)


def row(scale, hit, n_req, mean=None):
    return TradeoffRow("x", scale, EstimateWithCI(hit, hit, hit, 0.0, 1), mean if mean is not None else scale, n_req)


class TestCurve:
    def test_interpolation(self):
        c = TradeoffCurve("x", 10.0, [row(2, 0.8, 10), row(1, 0.6, 6)])
        assert c.required_at(0.7) == pytest.approx(8.0)
        assert c.required_at(0.6) == 6.0
        assert math.isnan(c.required_at(0.9))

    def test_sorted_and_monotone(self):
        c = TradeoffCurve("x", 10.0, [row(2, 0.8, 10), row(1, 0.6, 6), row(3, 0.75, 12)])
        assert [r.scale for r in c.sorted().rows] == [1, 2, 3]
        assert not c.monotone

    def test_envelope_interpolation_ignores_dips(self):
        c = TradeoffCurve("x", 10.0, [row(1, 0.6, 6), row(2, 0.75, 10), row(3, 0.72, 12), row(4, 0.9, 16)])
        assert c.required_at(0.7) == pytest.approx(6 + 4 * (0.1 / 0.15))

    def test_excess_ratios(self):
        curves = {"sscc": TradeoffCurve("sscc", 1, [row(1, 0.6, 4), row(2, 0.8, 6)]),
                  "independent": TradeoffCurve("independent", 1, [row(1, 0.6, 8), row(2, 0.8, 12)])}
        assert excess_ratios(curves, 0.7) == {"independent": pytest.approx(2.0)}


class TestSweep:
    def test_empty_families(self):
        with pytest.raises(ValueError):
            sweep_tradeoff([], DemandModel(2, 0.0), LAM, Window(30.0), 3.0, [1.0], ReplicationPlan(1))

    def test_full_retention_policies_coincide(self):
        d = DemandModel(4, 0.5)
        plan = ReplicationPlan(replications=2, seed=3, probes=100)
        soft = SoftCoreSettings(softness=np.inf)
        curves = sweep_tradeoff(["independent", "matern2", "sscc"], d, LAM, Window(60.0), 5.0, [4.0], plan, soft=soft)
        hits = {k: c.rows[0].hit.estimate for k, c in curves.items()}
        assert hits["independent"] == hits["matern2"] == hits["sscc"]
        assert hits["independent"] == pytest.approx(1 - math.exp(-LAM * math.pi * 25), abs=0.05)
        assert all(c.rows[0].n_req == 4 for c in curves.values())

    def test_policy_types(self):
        d = DemandModel(3, 0.5)
        p = allocate_retention(d, 1.0)
        from sscc.calibration import _policy_from_retention

        assert isinstance(_policy_from_retention("independent", p, LAM, SoftCoreSettings()), Independent)
        assert isinstance(_policy_from_retention("matern2", p, LAM, SoftCoreSettings()), HardCore)
        assert isinstance(_policy_from_retention("sscc", p, LAM, SoftCoreSettings()), SoftCore)
