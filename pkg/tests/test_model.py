"""Strict-feedback form contracts: f1/f2/g, regressor identity, theta layout."""

import math

import numpy as np
import pytest

from drrs import dynamics, model
from drrs.errors import SingularityError
from tests.test_dynamics import random_guarded_states


class TestF1:
    def test_level_arm(self):
        assert np.all(model.f1([0.0, 0.5, 1.0, 2.0]) == 0.0)

    def test_legacy_form(self):
        out = model.f1([math.pi / 4, 0.0, 3.0, 2.0], mode="legacy")
        assert out[0] == 0.0
        assert out[1] == pytest.approx(math.tan(math.pi / 4) * 2.0, rel=1e-15)

    def test_corrected_form(self):
        out = model.f1([math.pi / 4, 0.0, 3.0, 2.0], mode="corrected")
        assert out[1] == pytest.approx(math.tan(math.pi / 4) * 3.0 * 2.0, rel=1e-15)

    def test_mode_forms_differ_by_rate_factor(self):
        # corrected second entry carries the extra phi_v_dot factor exactly
        rng = np.random.default_rng(5)
        for state in random_guarded_states(rng, 50):
            corrected = model.f1(state, "corrected")[1]
            legacy = model.f1(state, "legacy")[1]
            assert corrected == legacy * state[2]

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            model.f1([0, 0, 0, 0], mode="bogus")


class TestF2:
    def test_zero_rates(self):
        assert np.all(model.f2([0.7, -0.2, 0.0, 0.0]) == 0.0)

    def test_first_diagonal_entry(self):
        F2 = model.f2([math.pi / 4, 0.0, 0.0, 2.0])
        assert F2[0, 0] == pytest.approx(2.0, rel=1e-15)  # 0.5 * 2^2
        assert F2[0, 1] == 0.0 and F2[1, 0] == 0.0

    def test_second_diagonal_entry(self):
        F2 = model.f2([math.pi / 4, 0.0, 1.0, 1.0])
        assert F2[1, 1] == pytest.approx(1.0, rel=1e-15)

    def test_corrected_f1_shares_f2_product(self):
        # the same phi_v_dot*phi_h_dot product appears in f1[1] and f2[1,1]
        rng = np.random.default_rng(6)
        for state in random_guarded_states(rng, 50):
            assert model.f1(state, "corrected")[1] == model.f2(state)[1, 1]


class TestGMatrix:
    def test_identity_at_level(self):
        assert np.all(model.g_matrix([0.0, 0, 0, 0]) == np.eye(2))

    def test_secant_scaling(self):
        G = model.g_matrix([math.pi / 3, 0, 0, 0])
        assert G[1, 1] == pytest.approx(2.0, rel=1e-12)

    def test_guard_rejects_edge(self):
        with pytest.raises(SingularityError):
            model.g_matrix([math.pi / 2 - 0.005, 0, 0, 0])

    def test_condition_number_bounded_under_guard(self):
        bound = 1.0 / math.cos(math.pi / 2 - dynamics.EPS_SING)
        state = [dynamics.PHI_V_LIMIT - 1e-12, 0, 0, 0]
        G = model.g_matrix(state)
        assert np.linalg.cond(G) <= bound * (1 + 1e-9)


class TestRegressor:
    def test_zero_state_columns(self):
        Phi = model.regressor([0.0, 0.0, 0.0, 0.0], [1.0, 1.0])
        assert np.allclose(Phi[0], [0, 0, 1, 1, 0, 0])
        assert np.allclose(Phi[1], [0, 0, 0, 0, 1, 1])

    def test_secant_on_rotor_columns(self):
        Phi = model.regressor([math.pi / 3, 0, 0, 0], [2.5, -1.5])
        assert Phi[1, 4] == pytest.approx(5.0, rel=1e-12)
        assert Phi[1, 5] == pytest.approx(-3.0, rel=1e-12)

    def test_fixed_sparsity(self):
        rng = np.random.default_rng(8)
        for state in random_guarded_states(rng, 100):
            Phi = model.regressor(state, rng.uniform(-50, 50, 2))
            assert np.all(Phi[0, [1, 4, 5]] == 0.0)
            assert np.all(Phi[1, [0, 2, 3]] == 0.0)

    @pytest.mark.parametrize("mode", ["corrected", "legacy"])
    def test_identity_against_plant(self, mode):
        params = dynamics.default_params()
        theta = dynamics.theta_true(params)
        rng = np.random.default_rng(13)
        states = random_guarded_states(rng, 1000)
        omegas = rng.uniform(-30.0, 30.0, (1000, 2))
        for state, (oa, ob) in zip(states, omegas):
            Omega = dynamics.rotor_map(np.array([oa, ob]))
            xi2_dot = dynamics.plant_derivative(params, state, oa, ob, mode)[2:4]
            lhs = model.regressor(state, Omega) @ theta
            assert np.max(np.abs(lhs - (xi2_dot - model.f1(state, mode)))) < 1e-12

    def test_column_ordering_via_one_hot(self):
        # column j of the regressor multiplies exactly theta entry j
        state = [0.4, -0.1, 1.2, -0.7]
        Omega = np.array([3.0, -2.0])
        Phi = model.regressor(state, Omega)
        for j in range(6):
            theta = np.zeros(6)
            theta[j] = 1.0
            assert np.all(Phi @ theta == Phi[:, j])


class TestThetaHelpers:
    def test_split_and_assemble_roundtrip(self):
        theta = np.arange(6.0)
        t1, t2 = model.theta1_part(theta), model.theta2_block(theta)
        assert np.all(t1 == [0.0, 1.0])
        assert np.all(t2 == [[2.0, 3.0], [4.0, 5.0]])
        assert np.all(model.assemble_theta(t1, t2) == theta)
