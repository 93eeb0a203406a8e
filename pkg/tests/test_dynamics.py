"""Plant-side contracts: rotor map, allocation, equations of motion."""

import math

import numpy as np
import pytest

from drrs import dynamics, model
from drrs.errors import SingularityError


@pytest.fixture
def params():
    return dynamics.default_params()


def random_guarded_states(rng, n):
    """States with |phi_v| safely inside the guard and O(1) rates."""
    states = np.empty((n, 4))
    states[:, 0] = rng.uniform(-1.3, 1.3, n)
    states[:, 1] = rng.uniform(-math.pi, math.pi, n)
    states[:, 2:] = rng.uniform(-3.0, 3.0, (n, 2))
    return states


class TestRotorMap:
    def test_pointwise_values(self):
        assert dynamics.rotor_map(0.0) == 0.0
        assert dynamics.rotor_map(2.0) == 4.0
        assert dynamics.rotor_map(-3.0) == -9.0

    def test_inverse_pointwise(self):
        assert dynamics.rotor_map_inverse(4.0) == 2.0
        assert dynamics.rotor_map_inverse(-9.0) == -3.0
        assert dynamics.rotor_map_inverse(0.0) == 0.0

    def test_odd_and_strictly_monotone(self):
        w = np.linspace(-1e3, 1e3, 4001)
        p = dynamics.rotor_map(w)
        assert np.allclose(dynamics.rotor_map(-w), -p)
        assert np.all(np.diff(p) > 0)

    def test_roundtrip_identity(self):
        w = np.linspace(-1e3, 1e3, 2001)
        back = dynamics.rotor_map_inverse(dynamics.rotor_map(w))
        assert np.max(np.abs(back - w)) < 1e-12 * 1e3


class TestAllocation:
    def test_equal_angles_rank_deficient(self, params):
        from dataclasses import replace

        p = replace(params, beta_a=0.0, beta_b=0.0)
        C = dynamics.allocation_matrix(p)
        kfl, kt = p.k_f * p.ell, p.k_tau
        assert np.allclose(C, [[kfl, -kfl], [kt, -kt]])
        assert dynamics.allocation_determinant(p) == 0.0
        assert abs(np.linalg.det(C)) < 1e-20

    def test_quarter_turn_offset_matrix(self, params):
        from dataclasses import replace

        p = replace(params, beta_a=0.0, beta_b=math.pi / 2)
        C = dynamics.allocation_matrix(p)
        kfl, kt = p.k_f * p.ell, p.k_tau
        expected = np.array([[kfl, kt], [kt, -kfl]])
        assert np.max(np.abs(C - expected)) < 1e-18

    def test_bench_determinant(self, params):
        # (ell^2 k_f^2 + k_tau^2) * sin(pi/2) with the bench numbers
        assert dynamics.allocation_determinant(params) == pytest.approx(
            1.65625e-5, rel=1e-14
        )
        assert np.linalg.det(dynamics.allocation_matrix(params)) == pytest.approx(
            1.65625e-5, rel=1e-12
        )

    def test_determinant_formula_matches_matrix(self, params):
        from dataclasses import replace

        rng = np.random.default_rng(7)
        for _ in range(1000):
            p = replace(
                params,
                ell=rng.uniform(0.1, 2.0),
                k_f=rng.uniform(1e-4, 1e-1),
                k_tau=rng.uniform(1e-5, 1e-2),
                beta_a=rng.uniform(-math.pi, math.pi),
                beta_b=rng.uniform(-math.pi, math.pi),
            )
            explicit = np.linalg.det(dynamics.allocation_matrix(p))
            formula = dynamics.allocation_determinant(p)
            scale = p.ell**2 * p.k_f**2 + p.k_tau**2
            assert abs(formula - explicit) < 1e-15 * scale + 1e-15 * abs(formula)

    def test_multiples_of_pi_kill_determinant(self, params):
        from dataclasses import replace

        for n in (-2, -1, 0, 1, 2):
            p = replace(params, beta_a=0.4, beta_b=0.4 - n * math.pi)
            det = dynamics.allocation_determinant(p)
            if n == 0:
                assert det == 0.0  # the angle difference is exactly representable
            else:
                # float n*pi is not exactly n*pi; the determinant lands at the
                # rounding floor of sin() instead of exact zero
                assert abs(det) < 1e-20

    def test_arbitrary_equal_angles(self, params):
        from dataclasses import replace

        p = replace(params, beta_a=-1.234, beta_b=-1.234)
        assert dynamics.allocation_determinant(p) == 0.0


class TestMoments:
    def test_zero_input(self, params):
        assert dynamics.moments(params, 0.0, 0.0) == (0.0, 0.0)

    def test_symmetric_rank_deficient_cancels(self, params):
        from dataclasses import replace

        p = replace(params, beta_a=0.0, beta_b=0.0)
        M_v, M_h = dynamics.moments(p, 7.5, 7.5)
        assert M_v == 0.0 and M_h == 0.0

    def test_single_rotor_bench(self, params):
        # oracle: scalar arithmetic on the channel definitions
        c, s = math.cos(params.beta_a), math.sin(params.beta_a)
        exp_v = (params.k_f * params.ell * c - params.k_tau * s) * 100.0
        exp_h = (params.k_f * params.ell * s + params.k_tau * c) * 100.0
        M_v, M_h = dynamics.moments(params, 10.0, 0.0)
        assert M_v == pytest.approx(exp_v, abs=1e-15)
        assert M_h == pytest.approx(exp_h, abs=1e-15)
        assert M_v == pytest.approx(0.229810, abs=5e-7)
        assert M_h == pytest.approx(0.335876, abs=5e-7)


class TestPlantDerivative:
    def test_equilibrium_at_rest(self, params):
        d = dynamics.plant_derivative(params, [0.0, 0.0, 0.0, 0.0], 0.0, 0.0)
        assert np.all(d == 0.0)

    def test_every_orientation_is_equilibrium_without_thrust(self, params):
        rng = np.random.default_rng(3)
        for _ in range(50):
            state = [rng.uniform(-1.3, 1.3), rng.uniform(-3, 3), 0.0, 0.0]
            d = dynamics.plant_derivative(params, state, 0.0, 0.0)
            assert np.all(d == 0.0)

    def test_level_arm_kills_coupling(self, params):
        d = dynamics.plant_derivative(params, [0.0, 0.3, 0.0, 2.0], 0.0, 0.0)
        assert d[2] == 0.0 and d[3] == 0.0

    def test_guard_rejects_near_vertical(self, params):
        with pytest.raises(SingularityError):
            dynamics.plant_derivative(params, [math.pi / 2 - 0.005, 0, 0, 0], 0.0, 0.0)

    @pytest.mark.parametrize("mode", ["corrected", "legacy"])
    def test_matches_strict_feedback_form(self, params, mode):
        theta = dynamics.theta_true(params)
        rng = np.random.default_rng(11)
        states = random_guarded_states(rng, 1000)
        omegas = rng.uniform(-30.0, 30.0, (1000, 2))
        for state, (oa, ob) in zip(states, omegas):
            lhs = dynamics.plant_derivative(params, state, oa, ob, mode)
            Omega = dynamics.rotor_map(np.array([oa, ob]))
            rhs24 = (
                model.f1(state, mode)
                + model.f2(state) @ theta[:2]
                + model.g_matrix(state) @ model.theta2_block(theta) @ Omega
            )
            assert np.max(np.abs(lhs[2:4] - rhs24)) < 1e-12
            assert np.all(lhs[0:2] == state[2:4])


class TestThetaTrue:
    def test_bench_values(self, params):
        # oracle: independent scalar arithmetic
        c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
        kfl, kt = params.k_f * params.ell, params.k_tau
        expected = np.array(
            [
                (6.25e-4 - 0.02) / 0.02,
                (0.02 - 6.25e-4) / 0.02,
                (kfl * c - kt * s) / 0.02,
                (-(kfl * c) - kt * s) / 0.02,
                (kfl * s + kt * c) / 0.02,
                (kfl * s - kt * c) / 0.02,
            ]
        )
        theta = dynamics.theta_true(params)
        assert np.max(np.abs(theta - expected)) < 1e-15
        assert theta[0] == pytest.approx(-0.96875)
        assert theta[1] == pytest.approx(0.96875)

    def test_identical_inertias_zero_ratios(self, params):
        from dataclasses import replace

        p = replace(params, J1=0.02, J2=0.02, J3=0.02)
        theta = dynamics.theta_true(p)
        assert theta[0] == 0.0 and theta[1] == 0.0

    def test_theta2_block_is_scaled_allocation(self, params):
        theta = dynamics.theta_true(params)
        scaled = np.diag([1 / params.J2, 1 / params.J3]) @ dynamics.allocation_matrix(params)
        assert np.max(np.abs(model.theta2_block(theta) - scaled)) < 1e-15


class TestPhysicalParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            dynamics.PhysicalParams(
                J1=-1.0, J2=0.02, J3=0.02, ell=1.0, k_f=4e-3, k_tau=7.5e-4,
                beta_a=0.0, beta_b=0.0,
            )

    def test_rejects_nonfinite_angle(self):
        with pytest.raises(ValueError):
            dynamics.PhysicalParams(
                J1=6.25e-4, J2=0.02, J3=0.02, ell=1.0, k_f=4e-3, k_tau=7.5e-4,
                beta_a=math.nan, beta_b=0.0,
            )
