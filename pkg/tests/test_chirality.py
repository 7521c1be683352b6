"""Order-parameter transform, vorticity and spin reconstruction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helimag.chirality import (
    ChiralityPair,
    oriented_angle,
    reconstruct_spin,
    transform,
    vorticity,
)
from helimag.lattice import ModelParams, ScalarGrid, SpinField

angle = st.floats(-math.pi, math.pi, allow_nan=False)


def make_helix(n, params, wsgn, zsgn):
    beta = params.helix_angle
    jj, ii = np.mgrid[0:n, 0:n]
    return SpinField.from_angles(beta * (wsgn * ii + zsgn * jj), params.lam)


class TestOrientedAngle:
    def test_quarter_turn(self):
        assert oriented_angle((1.0, 0.0), (0.0, 1.0)) == pytest.approx(math.pi / 2)
        assert oriented_angle((1.0, 0.0), (0.0, -1.0)) == pytest.approx(-math.pi / 2)

    def test_half_turn_is_minus_pi(self):
        # the branch cut maps +pi to -pi
        assert oriented_angle((1.0, 0.0), (-1.0, 0.0)) == pytest.approx(-math.pi)

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            oriented_angle((2.0, 0.0), (1.0, 0.0))

    @given(angle, angle)
    @settings(max_examples=100, deadline=None)
    def test_antisymmetry_off_cut(self, a, b):
        u = (math.cos(a), math.sin(a))
        v = (math.cos(b), math.sin(b))
        t = oriented_angle(u, v)
        s = oriented_angle(v, u)
        if abs(abs(t) - math.pi) > 1e-9:
            assert s == pytest.approx(-t, abs=1e-12)

    @given(angle, angle)
    @settings(max_examples=100, deadline=None)
    def test_range(self, a, b):
        u = (math.cos(a), math.sin(a))
        v = (math.cos(b), math.sin(b))
        t = oriented_angle(u, v)
        assert -math.pi <= t < math.pi + 1e-15


class TestTransform:
    def test_shapes(self):
        p = ModelParams(lam=0.1, delta=0.3)
        u = make_helix(5, p, 1, 1)
        theta, pair = transform(u, p)
        assert theta.theta_hor.values.shape == (5, 4)
        assert theta.theta_ver.values.shape == (4, 5)
        assert pair.w.values.shape == (5, 4)
        assert pair.z.values.shape == (4, 5)

    @pytest.mark.parametrize("wsgn", [1, -1])
    @pytest.mark.parametrize("zsgn", [1, -1])
    def test_helices_map_to_unit_chiralities(self, wsgn, zsgn):
        p = ModelParams(lam=0.05, delta=0.2)
        _, pair = transform(make_helix(8, p, wsgn, zsgn), p)
        np.testing.assert_allclose(pair.w.values, wsgn, atol=1e-12)
        np.testing.assert_allclose(pair.z.values, zsgn, atol=1e-12)

    def test_oracle_small_field(self):
        # independent elementwise recomputation
        rng = np.random.default_rng(11)
        p = ModelParams(lam=0.1, delta=0.4)
        psi = rng.uniform(-0.8, 0.8, (3, 3))
        u = SpinField.from_angles(psi, p.lam)
        theta, pair = transform(u, p)
        for j in range(3):
            for i in range(2):
                a, b = psi[j, i], psi[j, i + 1]
                t = math.atan2(math.sin(b - a), math.cos(b - a))
                assert theta.theta_hor.values[j, i] == pytest.approx(t, abs=1e-12)
                want = math.sqrt(2.0 / p.delta) * math.sin(t / 2.0)
                assert pair.w.values[j, i] == pytest.approx(want, abs=1e-12)

    def test_too_small(self):
        p = ModelParams(lam=0.1, delta=0.3)
        with pytest.raises(ValueError):
            transform(SpinField.from_angles(np.zeros((1, 5)), p.lam), p)

    def test_json_roundtrip(self):
        p = ModelParams(lam=0.1, delta=0.3)
        _, pair = transform(make_helix(4, p, 1, -1), p)
        pair2 = ChiralityPair.from_json(pair.to_json())
        np.testing.assert_allclose(pair2.w.values, pair.w.values)
        np.testing.assert_allclose(pair2.z.values, pair.z.values)
        assert pair2.delta == pair.delta


class TestVorticity:
    def test_zero_on_smooth_fields(self):
        rng = np.random.default_rng(5)
        p = ModelParams(lam=0.1, delta=0.3)
        psi = 0.3 * rng.normal(size=(6, 6))
        theta, _ = transform(SpinField.from_angles(psi, p.lam), p)
        v = vorticity(theta)
        np.testing.assert_array_equal(v.values, 0.0)

    def test_four_spin_vortex(self):
        # one spin per quadrant rotating by pi/2 counterclockwise
        p = ModelParams(lam=0.1, delta=0.5)
        psi = np.array(
            [[-3 * math.pi / 4, -math.pi / 4], [3 * math.pi / 4, math.pi / 4]]
        )
        theta, _ = transform(SpinField.from_angles(psi, p.lam), p)
        v = vorticity(theta)
        assert v.values.shape == (1, 1)
        assert v.values[0, 0] == pytest.approx(2 * math.pi, abs=1e-12)

    def test_rejects_inconsistent_fields(self):
        lam = 0.1
        th = ScalarGrid.from_values(np.full((2, 1), 0.3), lam)
        tv = ScalarGrid.from_values(np.array([[0.3, 0.7]]), lam)
        from helimag.chirality import ThetaFields

        with pytest.raises(ValueError):
            vorticity(ThetaFields(theta_hor=th, theta_ver=tv))


class TestReconstruct:
    def test_roundtrip_transform(self):
        rng = np.random.default_rng(21)
        p = ModelParams(lam=0.05, delta=0.3)
        psi = 0.5 * rng.normal(size=(5, 5))
        u = SpinField.from_angles(psi, p.lam)
        _, pair = transform(u, p)
        u2 = reconstruct_spin(pair, p, anchor=psi[0, 0])
        _, pair2 = transform(u2, p)
        np.testing.assert_allclose(pair2.w.values, pair.w.values, atol=1e-10)
        np.testing.assert_allclose(pair2.z.values, pair.z.values, atol=1e-10)

    def test_anchor_sets_global_rotation(self):
        p = ModelParams(lam=0.05, delta=0.3)
        _, pair = transform(make_helix(4, p, 1, 1), p)
        u = reconstruct_spin(pair, p, anchor=0.7)
        assert u.angles[0, 0] == pytest.approx(0.7)

    def test_rejects_bound_violation(self):
        p = ModelParams(lam=0.05, delta=0.3)
        big = 2.0 * math.sqrt(2.0 / p.delta)
        pair = ChiralityPair(
            w=ScalarGrid.from_values(np.full((3, 2), big), p.lam),
            z=ScalarGrid.from_values(np.zeros((2, 3)), p.lam),
            delta=p.delta,
        )
        with pytest.raises(ValueError):
            reconstruct_spin(pair, p)

    def test_rejects_open_plaquettes(self):
        p = ModelParams(lam=0.05, delta=0.3)
        w = np.zeros((2, 1))
        w[0, 0] = 0.5
        pair = ChiralityPair(
            w=ScalarGrid.from_values(w, p.lam),
            z=ScalarGrid.from_values(np.zeros((1, 2)), p.lam),
            delta=p.delta,
        )
        with pytest.raises(ValueError):
            reconstruct_spin(pair, p)
