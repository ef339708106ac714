import numpy as np
import pytest
from hypothesis import given, strategies as st

from capacitary.content import (
    ContentParams,
    brute_force_content,
    cube_content,
    dyadic_content,
    dyadic_content_many,
    equivalence_diagnostic,
    optimal_cover,
    slab_content_diagnostic,
)
from capacitary.dyadic import CellSet, DyadicCube, GridSpec, cells_in_cube, dyadic_cubes
from strategies import cell_sets, deltas_for, grid_specs

# values produced by brute_force_content (independent cover enumeration)
FROZEN = [
    (1, 3, 0.8, [0, 1, 5], 0.5193415485070233),
    (1, 4, 0.9, [0, 1, 2, 3, 9, 15], 0.4521130775958705),
    (2, 2, 1.7, [0, 1, 4, 5, 10, 15], 0.4972506741500289),
    (2, 3, 1.8, [0, 1, 8, 9, 27, 63], 0.12983538712675582),
    (2, 2, 1.2, [0, 5, 6], 0.5683937124413994),
]


def content(E, delta):
    return dyadic_content(E, ContentParams(E.spec.n, delta))


class TestExamples:
    def test_two_leaves(self):
        s = GridSpec(1, 1)
        assert content(CellSet.full(s), 0.5) == 1.0
        assert brute_force_content(CellSet.full(s), ContentParams(1, 0.5)) == 1.0

    def test_empty(self):
        assert content(CellSet.empty(GridSpec(2, 2)), 1.0) == 0.0

    def test_single_leaf_full_dimension(self):
        s = GridSpec(2, 3)
        E = CellSet.from_indices(s, [5])
        assert brute_force_content(E, ContentParams(2, 2.0)) == pytest.approx((1 / 8) ** 2, rel=1e-15)

    def test_child_of_root(self):
        s = GridSpec(2, 2, root_side=3)
        E = cells_in_cube(s, DyadicCube(1, (1, 0)))
        assert brute_force_content(E, ContentParams(2, 1.5)) == pytest.approx(1.5**1.5, rel=1e-15)
        assert content(E, 1.5) == pytest.approx(1.5**1.5, rel=1e-15)

    @pytest.mark.parametrize("n,depth,delta,cells,expected", FROZEN)
    def test_frozen_oracle_values(self, n, depth, delta, cells, expected):
        E = CellSet.from_indices(GridSpec(n, depth), cells)
        assert content(E, delta) == pytest.approx(expected, rel=1e-12)

    def test_hand_value(self):
        # [0,1/4) plus the single cell 5 at depth 3
        assert FROZEN[0][-1] == pytest.approx(0.25**0.8 + 0.125**0.8, rel=1e-15)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            ContentParams(2, 0.0)
        with pytest.raises(ValueError):
            ContentParams(2, 2.5)
        with pytest.raises(ValueError):
            content(CellSet.full(GridSpec(1, 2)), 1.5)

    def test_brute_force_bound(self):
        E = CellSet.full(GridSpec(1, 5))
        with pytest.raises(ValueError):
            brute_force_content(E, ContentParams(1, 0.5))


class TestSlabs:
    @pytest.mark.parametrize("delta,t,depth,expected", [
        (1.0, 0.25, 2, 1.0), (0.5, 0.5, 1, 1.0), (2.0, 2.0**-4, 4, 2.0**-4),
    ])
    def test_values(self, delta, t, depth, expected):
        got = slab_content_diagnostic(ContentParams(2, delta), 1, t, depth)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_matches_brute_force(self):
        params = ContentParams(2, 1.0)
        s = GridSpec(2, 2)
        slab = CellSet(s, np.repeat([[True, False, False, False]], 4, axis=0).reshape(-1))
        assert brute_force_content(slab, params) == pytest.approx(
            slab_content_diagnostic(params, 1, 0.25, 2), rel=1e-12)


class TestCovers:
    def test_tie_goes_to_children(self):
        E = CellSet.from_indices(GridSpec(1, 2), [0, 3])
        cover = optimal_cover(E, ContentParams(1, 0.5))
        assert cover == [DyadicCube(2, (0,)), DyadicCube(2, (3,))]

    @given(grid_specs(max_cells=64), st.data())
    def test_cover_cost_is_content(self, spec, data):
        delta = data.draw(deltas_for(spec.n))
        E = data.draw(cell_sets(spec))
        params = ContentParams(spec.n, delta)
        cover = optimal_cover(E, params)
        cost = sum(cube_content(float(spec.side(c.level)), delta) for c in cover)
        assert cost == pytest.approx(dyadic_content(E, params), rel=1e-12, abs=1e-300)
        covered = CellSet.empty(spec)
        for c in cover:
            covered = covered | cells_in_cube(spec, c)
        assert E.issubset(covered)

    def test_trace(self):
        value, cover = dyadic_content(CellSet.full(GridSpec(1, 2)), 0.5, trace=True)
        assert value == 1.0 and cover == [DyadicCube.root(1)]


class TestProperties:
    @given(grid_specs(max_cells=64), st.data())
    def test_monotone(self, spec, data):
        delta = data.draw(deltas_for(spec.n))
        E = data.draw(cell_sets(spec))
        F = E | data.draw(cell_sets(spec))
        assert content(E, delta) <= content(F, delta) * (1 + 1e-12)

    @given(grid_specs(max_cells=64), st.data())
    def test_subadditive(self, spec, data):
        delta = data.draw(deltas_for(spec.n))
        parts = [data.draw(cell_sets(spec)) for _ in range(data.draw(st.integers(1, 4)))]
        union = CellSet.empty(spec)
        for p in parts:
            union = union | p
        assert content(union, delta) <= sum(content(p, delta) for p in parts) * (1 + 1e-12)

    @given(grid_specs(max_cells=64), st.data())
    def test_cube_content_exact(self, spec, data):
        delta = data.draw(deltas_for(spec.n))
        cube = data.draw(st.sampled_from(dyadic_cubes(spec)))
        assert content(cells_in_cube(spec, cube), delta) == float(spec.side(cube.level)) ** delta

    @given(st.integers(1, 2), st.integers(0, 3), st.data())
    def test_scaling(self, n, k, data):
        depth = 3 if n == 1 else 2
        delta = data.draw(deltas_for(n))
        bits = data.draw(st.lists(st.booleans(), min_size=1 << (n * depth), max_size=1 << (n * depth)))
        t = 2.0**k
        a = CellSet(GridSpec(n, depth), np.array(bits))
        b = CellSet(GridSpec(n, depth, root_side=t), np.array(bits))
        assert content(b, delta) == pytest.approx(t**delta * content(a, delta), rel=1e-12, abs=1e-300)

    @given(st.sampled_from([(1, 3), (2, 2), (3, 1)]), st.data())
    def test_oracle_equivalence(self, shape, data):
        spec = GridSpec(*shape)
        delta = data.draw(deltas_for(spec.n))
        E = data.draw(cell_sets(spec))
        params = ContentParams(spec.n, delta)
        assert dyadic_content(E, params) == pytest.approx(brute_force_content(E, params), rel=1e-12, abs=0)

    @given(grid_specs(max_cells=64), st.data())
    def test_equivalence_bounds(self, spec, data):
        delta = data.draw(deltas_for(spec.n))
        E = data.draw(cell_sets(spec))
        if E.is_empty:
            return
        d = equivalence_diagnostic(E, ContentParams(spec.n, delta))
        assert d["lower_bound"] <= d["dyadic"] * (1 + 1e-12)
        assert d["upper_bound"] <= d["dyadic"] * (1 + 1e-12)


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_backends_agree(backend):
    rng = np.random.default_rng(1)
    spec = GridSpec(2, 4)
    masks = rng.random((50, spec.num_cells)) < 0.3
    ref = dyadic_content_many(spec, masks, 1.3, backend="numpy")
    got = dyadic_content_many(spec, masks, 1.3, backend=backend)
    assert np.array_equal(ref, got)
