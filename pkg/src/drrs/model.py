"""Strict-feedback form of the rig dynamics.

With xi1 = [phi_v, phi_h] and xi2 = [phi_v_dot, phi_h_dot] the equations of
motion split as

    xi1_dot = xi2
    xi2_dot = f1(x) + f2(x) @ Theta1 + g_matrix(x) @ Theta2 @ Omega

where Omega = [p(omega_a), p(omega_b)] and Theta = [Theta1; vec(Theta2)] is
the constant lumped parameter vector (`dynamics.theta_true`).  The regressor
rearranges the same identity as xi2_dot - f1 = regressor(x, Omega) @ Theta.

State index aliasing used below: x1, x2, x3, x4 = phi_v, phi_h, phi_v_dot,
phi_h_dot.
"""

import math

import numpy as np

from .dynamics import check_guard, check_mode


def f1(state, mode: str = "corrected") -> np.ndarray:
    """Parameter-free drift term [0, tan(x1)*x3*x4] ("legacy": [0, tan(x1)*x4])."""
    check_mode(mode)
    x1, _x2, x3, x4 = (float(s) for s in state)
    check_guard(x1)
    if mode == "corrected":
        return np.array([0.0, math.tan(x1) * x3 * x4])
    return np.array([0.0, math.tan(x1) * x4])


def f2(state) -> np.ndarray:
    """Diagonal 2x2 factor multiplying Theta1: diag(sin*cos*x4^2, tan*x3*x4)."""
    x1, _x2, x3, x4 = (float(s) for s in state)
    check_guard(x1)
    return np.array(
        [
            [math.sin(x1) * math.cos(x1) * x4**2, 0.0],
            [0.0, math.tan(x1) * x3 * x4],
        ]
    )


def g_matrix(state) -> np.ndarray:
    """Input scaling diag(1, sec(x1)); invertible under the guard."""
    x1 = float(state[0])
    check_guard(x1)
    return np.array([[1.0, 0.0], [0.0, 1.0 / math.cos(x1)]])


def regressor(state, Omega) -> np.ndarray:
    """2x6 regressor Phi with xi2_dot - f1 = Phi @ Theta.

    Fixed sparsity: row 1 is nonzero only in columns 1, 3, 4 and row 2 only in
    columns 2, 5, 6 (1-based).
    """
    x1, _x2, x3, x4 = (float(s) for s in state)
    check_guard(x1)
    sec = 1.0 / math.cos(x1)
    Phi = np.zeros((2, 6))
    Phi[0, 0] = math.sin(x1) * math.cos(x1) * x4**2
    Phi[1, 1] = math.tan(x1) * x3 * x4
    Phi[0, 2] = Omega[0]
    Phi[0, 3] = Omega[1]
    Phi[1, 4] = Omega[0] * sec
    Phi[1, 5] = Omega[1] * sec
    return Phi


def theta1_part(theta) -> np.ndarray:
    """First two entries of the lumped parameter vector."""
    return np.asarray(theta, dtype=float)[:2]


def theta2_block(theta) -> np.ndarray:
    """Entries 3..6 reshaped row-major into the 2x2 input-map block."""
    return np.asarray(theta, dtype=float)[2:6].reshape(2, 2)


def assemble_theta(theta1, theta2) -> np.ndarray:
    """Inverse of the (theta1_part, theta2_block) split."""
    return np.concatenate([np.asarray(theta1, float), np.asarray(theta2, float).ravel()])
