import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from capacitary.dyadic import DyadicCube, GridFunction, GridSpec, cells_in_cube
from capacitary.generators import counterexample1_pair, random_step_function, random_two_level_weight, random_weight
from capacitary.verify import (
    check_classical_corollary,
    check_fubini_substitute,
    check_pointwise_fubini_condition,
    check_strong_type,
    check_weak_space_boundedness,
    check_weak_type,
    counterexample_1,
    counterexample_2,
    counterexample_3,
    loglog_slope,
    sweep_check,
)
from capacitary.weights import power_weight


def indicator(spec, cube):
    return cells_in_cube(spec, cube).indicator()


class TestFubini:
    def test_indicator_constant_weight(self):
        s = GridSpec(2, 3)
        f = indicator(s, DyadicCube(1, (0, 1)))
        rep = check_fubini_substitute(f, GridFunction.constant(s), 2, 1.0)
        assert rep.passed and rep.measured["lower_ratio"] == pytest.approx(1.0, rel=1e-14)

    @given(st.integers(0, 100_000))
    def test_lower_bound_random(self, seed):
        rng = np.random.default_rng(seed)
        s = GridSpec(1, 6)
        rep = check_fubini_substitute(random_step_function(s, rng), random_weight(s, rng), 2, 0.5)
        assert rep.passed

    def test_counterexample_upper_ratio_grows(self):
        ratios = []
        for m in (2, 4, 8):
            f, w = counterexample1_pair(m, 2)
            ratios.append(check_fubini_substitute(f, w, 2, 0.5).measured["upper_ratio"])
        assert ratios[0] < ratios[1] < ratios[2]


class TestTypeChecks:
    @pytest.mark.parametrize("check", [check_strong_type, check_weak_space_boundedness])
    def test_constant_f(self, check):
        s = GridSpec(1, 5)
        rep = check(GridFunction.constant(s, 2.0), power_weight(s, 0.2), 2, 0.5)
        assert rep.measured["ratio"] == pytest.approx(1.0, rel=1e-12)

    def test_weak_constant(self):
        s = GridSpec(1, 4)
        w = random_weight(s, np.random.default_rng(0))
        rep = check_weak_type(GridFunction.constant(s, 3.0), w, 1, 0.5)
        assert math.isfinite(rep.measured["ratio"])

    def test_strong_in_class_bounded(self):
        def one(L):
            s = GridSpec(1, L)
            f = random_step_function(s, np.random.default_rng(1), levels=3)
            return check_strong_type(f, power_weight(s, 0.2), 2, 0.5)

        assert sweep_check(one, [4, 6, 8]).verdict == "stable"

    def test_strong_outside_grows(self):
        def one(L):
            s = GridSpec(1, L)
            f = GridFunction(s, np.eye(1, s.num_cells).reshape(-1))
            return check_strong_type(f, power_weight(s, -0.5), 2, 0.5)

        rep = sweep_check(one, [4, 6, 8])
        vals = rep.measured["values"]
        assert vals[0] < vals[1] < vals[2]

    def test_heavy_tail(self):
        s = GridSpec(1, 4)
        f = GridFunction(s, 2.0 ** np.arange(16))
        rep = check_weak_space_boundedness(f, GridFunction.constant(s), 2, 0.5)
        assert math.isfinite(rep.measured["ratio"])

    def test_classical(self):
        rng = np.random.default_rng(2)
        s = GridSpec(1, 5)
        rep = check_classical_corollary(random_step_function(s, rng), GridFunction.constant(s), 2, 1.0, 0.5)
        assert rep.passed and math.isfinite(rep.measured["ratio"])
        with pytest.raises(ValueError):
            check_classical_corollary(random_step_function(s, rng), GridFunction.constant(s), 2, 0.5, 0.5)

    def test_classical_full_dimension_matches_strong(self):
        rng = np.random.default_rng(3)
        s = GridSpec(1, 5)
        f, w = random_step_function(s, rng), random_weight(s, rng)
        a = check_classical_corollary(f, w, 2, 2, 1.0).measured["ratio"]
        b = check_strong_type(f, w, 2, 1.0).measured["ratio"]
        assert a == pytest.approx(b, rel=1e-12)


class TestCounterexamples:
    def test_first(self):
        rep = counterexample_1(4, 2, 1.0)
        assert rep.passed
        assert rep.measured["product_integral"] == 1.0
        assert rep.measured["iterated_integral"] > 0.5

    def test_first_slope(self):
        rep = counterexample_1(16, 2, 0.5)
        assert rep.measured["slope"] >= 1.4

    def test_first_degenerate(self):
        rep = counterexample_1(8, 1, 1.0)
        assert abs(rep.measured["slope"]) <= 0.1

    def test_first_rejects_bad_m(self):
        with pytest.raises(ValueError):
            counterexample_1(6, 2, 1.0)

    def test_second(self):
        rep = counterexample_2(4, 0.5, 1.0)
        assert rep.passed and rep.bound == pytest.approx(0.5)
        assert all(r["order1"] == pytest.approx(1.0, abs=1e-12) for r in rep.measured["rows"])
        assert rep.measured["slope"] >= 0.4

    def test_second_ranges(self):
        with pytest.raises(ValueError):
            counterexample_2(4, 1.0, 1.0)
        with pytest.raises(ValueError):
            counterexample_2(4, 0.5, 1.5)

    @pytest.mark.parametrize("delta,K,depth", [(1.0, 4, 6), (0.5, 5, 5)])
    def test_third(self, delta, K, depth):
        rep = counterexample_3(K, 2, delta, depth)
        assert rep.passed
        assert rep.measured["partial_sums"][-1] == pytest.approx(K, rel=1e-12)
        assert rep.measured["product_integral"] == pytest.approx(1.0, abs=1e-12)

    def test_third_ranges(self):
        with pytest.raises(ValueError):
            counterexample_3(3, 2, 1.5, 4)
        with pytest.raises(ValueError):
            counterexample_3(5, 2, 1.0, 4)


class TestPointwiseCondition:
    def test_constant(self):
        rep = check_pointwise_fubini_condition(GridFunction.constant(GridSpec(1, 4)), 0.5)
        assert rep.measured["sup_ratio"] == pytest.approx(1.0, rel=1e-14)

    def test_counterexample_grows(self):
        sups = [check_pointwise_fubini_condition(counterexample1_pair(m, 1)[1], 0.5, samples=10).measured["sup_ratio"]
                for m in (2, 4, 8, 16)]
        assert all(a < b for a, b in zip(sups, sups[1:]))

    def test_two_valued(self):
        w = random_two_level_weight(GridSpec(1, 3), np.random.default_rng(0))
        rep = check_pointwise_fubini_condition(w, 0.5, samples=50, seed=4)
        assert math.isfinite(rep.measured["sup_ratio"]) and math.isfinite(rep.measured["level_slice_ratio"])
        assert rep.seed == 4


def test_report_serialises():
    rep = counterexample_3(3, 2, 1.0, 4)
    text = json.dumps(rep.to_json())
    assert '"check_id": "counterexample3"' in text
    keys = [k for k, _ in rep.rows()]
    assert "measured.partial_sums" in keys


def test_slope():
    assert loglog_slope([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)
