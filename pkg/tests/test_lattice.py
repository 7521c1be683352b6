"""Geometry, parameters, grids and the piecewise-affine interpolant."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helimag.lattice import (
    AffineInterpolant,
    Domain,
    ModelParams,
    ScalarGrid,
    SpinField,
    affine_interpolate,
    det_sum,
    discrete_derivative,
    index_mask,
    index_set,
)


def test_det_sum_is_deterministic_and_exact_on_ints():
    a = np.arange(1000, dtype=float).reshape(20, 50)
    assert det_sum(a) == 999 * 1000 / 2
    assert det_sum(a) == det_sum(a.copy())


class TestDomain:
    def test_rejects_nonpositive_size(self):
        with pytest.raises(ValueError):
            Domain(width=0.0)
        with pytest.raises(ValueError):
            Domain(height=-1.0)

    def test_cell_inside_rectangle(self):
        d = Domain(width=1.0, height=1.0)
        lam = 0.25
        assert d.cell_inside(0, 0, lam)
        assert d.cell_inside(3, 3, lam)
        assert not d.cell_inside(4, 0, lam)
        assert not d.cell_inside(-1, 0, lam)

    def test_cell_inside_boundary_tolerance(self):
        # cell touching the boundary exactly counts as inside
        d = Domain(width=0.75, height=0.75)
        assert d.cell_inside(2, 2, 0.25)
        assert not d.cell_inside(3, 2, 0.25)

    def test_cell_test_override(self):
        # lower-triangle predicate
        d = Domain(cell_test=lambda i, j, lam: i + j < 3)
        assert d.cell_inside(0, 2, 0.1)
        assert not d.cell_inside(2, 1, 0.1)


class TestModelParams:
    def test_derived_quantities(self):
        p = ModelParams(lam=0.01, delta=0.5)
        assert p.alpha == pytest.approx(2.0)
        assert p.epsilon == pytest.approx(0.01)
        assert p.helix_angle == pytest.approx(math.pi / 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelParams(lam=-1.0, delta=0.5)
        with pytest.raises(ValueError):
            ModelParams(lam=0.1, delta=0.0)
        with pytest.raises(ValueError):
            ModelParams(lam=0.1, delta=1.0)

    def test_out_of_regime_warns(self):
        with pytest.warns(UserWarning):
            ModelParams(lam=2.0, delta=0.5)


class TestIndexSet:
    def test_unit_square_quarter_spacing(self):
        # 4x4 cells; needs cells (i,j), (i+1,j), (i,j+1) all inside
        got = index_set(Domain(), 0.25)
        want = [(i, j) for j in range(3) for i in range(3)]
        assert got == want

    def test_row_major_order(self):
        got = index_set(Domain(width=1.0, height=0.5), 0.25)
        assert got == sorted(got, key=lambda t: (t[1], t[0]))

    def test_empty_when_too_coarse(self):
        assert index_set(Domain(), 0.9) == []

    def test_offset_domain(self):
        got = index_set(Domain(x0=1.0, y0=2.0, width=0.5, height=0.5), 0.25)
        assert got == [(4, 8)]

    def test_mask_matches_list(self):
        d = Domain(width=1.0, height=0.75)
        lam = 0.25
        mask = index_mask(d, lam, 4, 3)
        pairs = {(i, j) for i, j in index_set(d, lam)}
        for j in range(3):
            for i in range(4):
                assert mask[j, i] == ((i, j) in pairs)


class TestGrids:
    def test_scalar_grid_roundtrip(self):
        g = ScalarGrid.from_values(np.arange(6.0).reshape(2, 3), 0.5)
        g2 = ScalarGrid.from_json(g.to_json())
        assert g2.nx == 3 and g2.ny == 2
        assert g2.spacing == 0.5
        np.testing.assert_array_equal(g2.values, g.values)

    def test_spin_field_roundtrip(self):
        u = SpinField.from_angles(np.linspace(-3, 3, 12).reshape(3, 4), 0.1)
        u2 = SpinField.from_json(u.to_json())
        np.testing.assert_allclose(u2.angles, u.angles)
        ux, uy = u2.vectors()
        np.testing.assert_allclose(ux * ux + uy * uy, 1.0)

    def test_json_row_major_layout(self):
        vals = np.array([[1.0, 2.0], [3.0, 4.0]])
        doc = json.loads(ScalarGrid.from_values(vals, 1.0).to_json())
        assert doc["values"] == [1.0, 2.0, 3.0, 4.0]


class TestDerivatives:
    def test_forward_difference(self):
        g = ScalarGrid.from_values(np.array([[0.0, 1.0, 3.0], [2.0, 2.0, 2.0]]), 0.5)
        d1 = discrete_derivative(g, "d1").values
        np.testing.assert_allclose(d1, [[2.0, 4.0], [0.0, 0.0]])
        d2 = discrete_derivative(g, "d2").values
        np.testing.assert_allclose(d2, [[4.0, 2.0, -2.0]])

    def test_unknown_stencil(self):
        g = ScalarGrid.from_values(np.zeros((3, 3)), 1.0)
        with pytest.raises(ValueError):
            discrete_derivative(g, "dx")

    @given(st.integers(0, 2 ** 31))
    @settings(max_examples=20, deadline=None)
    def test_d12_commutes(self, seed):
        rng = np.random.default_rng(seed)
        g = ScalarGrid.from_values(rng.normal(size=(5, 6)), 0.3)
        a = discrete_derivative(g, "d12").values
        d1 = discrete_derivative(g, "d1")
        b = discrete_derivative(d1, "d2").values
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_second_derivative_of_quadratic(self):
        lam = 0.25
        jj, ii = np.mgrid[0:5, 0:5]
        g = ScalarGrid.from_values((lam * ii) ** 2, lam)
        np.testing.assert_allclose(discrete_derivative(g, "d11").values, 2.0)


class TestAffineInterpolant:
    def test_matches_lattice_points(self):
        rng = np.random.default_rng(3)
        lam = 0.5
        g = ScalarGrid.from_values(rng.normal(size=(4, 5)), lam)
        f = affine_interpolate(g)
        jj, ii = np.mgrid[0:4, 0:5]
        np.testing.assert_allclose(f(lam * ii, lam * jj), g.values, atol=1e-14)

    def test_exact_on_affine_data(self):
        lam = 0.2
        jj, ii = np.mgrid[0:4, 0:4]
        g = ScalarGrid.from_values(3.0 * lam * ii - 2.0 * lam * jj + 1.0, lam)
        f = affine_interpolate(g)
        x = np.array([0.07, 0.33, 0.55])
        y = np.array([0.11, 0.29, 0.41])
        np.testing.assert_allclose(f(x, y), 3.0 * x - 2.0 * y + 1.0, atol=1e-13)

    def test_continuity_across_antidiagonal(self):
        rng = np.random.default_rng(7)
        g = ScalarGrid.from_values(rng.normal(size=(3, 3)), 1.0)
        f = affine_interpolate(g)
        t = np.linspace(0.05, 0.95, 11)
        # points on the cut x + y = 1 of cell (0, 0)
        below = f(t - 1e-10, 1.0 - t)
        above = f(t + 1e-10, 1.0 - t)
        np.testing.assert_allclose(below, above, atol=1e-8)

    def test_gradient_table_shapes(self):
        g = ScalarGrid.from_values(np.random.default_rng(0).normal(size=(4, 6)), 0.1)
        tab = AffineInterpolant(g).gradient_table()
        for k in ("lower_dx", "lower_dy", "upper_dx", "upper_dy"):
            assert tab[k].shape == (3, 5)

    def test_rejects_outside_points(self):
        g = ScalarGrid.from_values(np.zeros((3, 3)), 1.0)
        f = affine_interpolate(g)
        with pytest.raises(ValueError):
            f(2.5, 0.5)

    def test_too_small_grid(self):
        with pytest.raises(ValueError):
            affine_interpolate(ScalarGrid.from_values(np.zeros((1, 4)), 1.0))
