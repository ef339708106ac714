import numpy as np
import pytest
from hypothesis import given, strategies as st

from capacitary.dyadic import GridFunction, GridSpec
from capacitary.factorize import jones_factorize, jones_synthesize, quasi_linearity_ratio, t_operators
from capacitary.generators import random_two_level_weight, random_weight
from capacitary.weights import a1_constant, power_weight
from strategies import deltas_for, grid_functions, grid_specs


class TestOperators:
    def test_constant(self):
        s = GridSpec(1, 3)
        one = GridFunction.constant(s)
        t1, t2, t3 = t_operators(GridFunction.constant(s, 3.0), one, 2, 0.5)
        np.testing.assert_allclose(t1.values, 3.0, rtol=1e-14)
        np.testing.assert_allclose(t2.values, 3.0, rtol=1e-14)
        np.testing.assert_allclose(t3.values, 6.0, rtol=1e-14)

    def test_zero(self):
        s = GridSpec(1, 3)
        out = t_operators(GridFunction.constant(s, 0.0), power_weight(s, 0.2), 2, 0.5)
        assert all(np.all(t.values == 0) for t in out)

    @given(grid_specs(max_cells=64), st.data())
    def test_homogeneous(self, spec, data):
        delta = data.draw(deltas_for(spec.n))
        f = data.draw(grid_functions(spec))
        w = data.draw(grid_functions(spec, positive=True))
        c = data.draw(st.sampled_from([0.5, 2.0, 3.0]))
        a = t_operators(f * c, w, 2.5, delta)
        b = t_operators(f, w, 2.5, delta)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x.values, c * y.values, rtol=1e-12, atol=1e-300)

    @given(st.integers(0, 1000))
    def test_quasi_linearity_reported(self, seed):
        rng = np.random.default_rng(seed)
        s = GridSpec(1, 4)
        fs = [GridFunction(s, rng.uniform(0, 2, 16)) for _ in range(3)]
        out = quasi_linearity_ratio(fs, random_weight(s, rng), 2, 0.5)
        assert np.isfinite(out["T1"]) and np.isfinite(out["T2"])

    def test_needs_p_above_one(self):
        s = GridSpec(1, 2)
        with pytest.raises(ValueError):
            t_operators(GridFunction.constant(s), GridFunction.constant(s), 1, 0.5)


class TestFactorize:
    def test_constant_closed_form(self):
        s = GridSpec(1, 4)
        res = jones_factorize(GridFunction.constant(s), 2, 0.5, A=4.0)
        np.testing.assert_allclose(res.phi.values, 2.0, rtol=1e-9)
        np.testing.assert_allclose(res.w0.values, 4.0, rtol=1e-9)
        np.testing.assert_allclose(res.w1.values, 4.0, rtol=1e-9)

    def test_p_one_passthrough(self):
        w = power_weight(GridSpec(1, 4), -0.2)
        res = jones_factorize(w, 1, 0.5)
        assert res.w0 is w and np.all(res.w1.values == 1.0)

    @pytest.mark.parametrize("maker", [
        lambda s, rng: power_weight(s, 0.25),
        lambda s, rng: random_two_level_weight(s, rng),
        lambda s, rng: random_weight(s, rng, spread=3.0, levels=3),
    ])
    def test_reconstruction(self, maker):
        rng = np.random.default_rng(0)
        s = GridSpec(1, 6)
        w = maker(s, rng)
        res = jones_factorize(w, 2, 0.5)
        assert res.reconstruction_error(w) <= 1e-10
        assert res.tail < 1e-8
        assert res.diagnostics["T1_phi_over_phi"] <= res.diagnostics["domination_target"] * (1 + 1e-9)
        assert res.diagnostics["T2_phi_over_phi"] <= res.diagnostics["domination_target"] * (1 + 1e-9)

    def test_no_decay_raises(self):
        s = GridSpec(1, 3)
        with pytest.raises(ValueError):
            jones_factorize(GridFunction.constant(s), 2, 0.5, A=1.0, max_terms=20)

    def test_balanced_seed_power_weight_stable(self):
        vals = []
        for L in (4, 6, 8):
            w = power_weight(GridSpec(1, L), 0.25)
            res = jones_factorize(w, 2, 0.5, g=w ** -0.25)
            vals.append((res.a1_w0.value, res.a1_w1.value))
        a0, a1 = zip(*vals)
        assert a0[2] / a0[1] - 1 < 0.05
        assert a1[1] < a1[2] < 2


class TestSynthesize:
    def test_constants(self):
        s = GridSpec(1, 3)
        rep = jones_synthesize(GridFunction.constant(s), GridFunction.constant(s), 2, 0.5)
        assert rep.ap == pytest.approx(1.0) and rep.holds

    def test_a1_weight_is_ap(self):
        s = GridSpec(1, 6)
        w0 = power_weight(s, -0.3)
        rep = jones_synthesize(w0, GridFunction.constant(s), 2, 0.5)
        assert np.allclose(rep.w.values, w0.values) and rep.holds

    @given(st.integers(0, 10_000), st.floats(1.2, 3.5))
    def test_inequality(self, seed, p):
        rng = np.random.default_rng(seed)
        s = GridSpec(1, 4)
        rep = jones_synthesize(random_weight(s, rng), random_weight(s, rng), p, 0.5)
        assert rep.holds

    def test_roundtrip_through_factorization(self):
        rng = np.random.default_rng(3)
        w = random_two_level_weight(GridSpec(1, 5), rng)
        res = jones_factorize(w, 2, 0.5)
        rep = jones_synthesize(res.w0, res.w1, 2, 0.5)
        np.testing.assert_allclose(rep.w.values, w.values, rtol=1e-10)
        assert rep.holds
        assert rep.a1_w0 == pytest.approx(a1_constant(res.w0, 0.5).value)
