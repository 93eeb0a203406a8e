"""Linearizing control law and the two outer tracking loops.

The feedback Omega = inv(G @ Theta2_hat) @ (-f1 - f2 @ Theta1_hat + v) cancels
the modeled drift and renders each output channel a double integrator driven
by the virtual input v.  Constant commands use an integral servo
v = k_x x + k_q q with q_dot = r - y; time-varying commands use
v = K (x - x_d) + B_C' x_d_dot, which feeds the commanded acceleration
forward.  Gains come from the Riccati solver in `numerics`.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import model
from .dynamics import rotor_map, rotor_map_inverse
from .errors import SingularControlAuthority
from .numerics import LqrProblem, care_solve

EPS_DET = 1e-8

# Double-integrator chain for the linearized loop: x = [xi1; xi2], y = xi1.
A_C = np.array(
    [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]
)
B_C = np.array(
    [
        [0.0, 0.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
    ]
)
C_C = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ]
)


@dataclass(frozen=True)
class ServoGains:
    """Integral-servo gains with the sign convention v = k_x x + k_q q."""

    k_x: np.ndarray  # 2x4
    k_q: np.ndarray  # 2x2


def _as_weight(value, n: int) -> np.ndarray:
    """Scalar -> scaled identity; matrix -> validated n x n array."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(n)
    if arr.shape != (n, n):
        raise ValueError(f"weight must be a scalar or {n}x{n}, got {arr.shape}")
    return arr


def augmented_servo_system() -> tuple[np.ndarray, np.ndarray]:
    """Chain-of-integrators state augmented with the output integrator.

    The integrator row uses -C_C so that the LQR cost weights the tracking
    error; with r exogenous the design model is q_dot = -y.
    """
    A_bar = np.zeros((6, 6))
    A_bar[:4, :4] = A_C
    A_bar[4:, :4] = -C_C
    B_bar = np.zeros((6, 2))
    B_bar[:4, :] = B_C
    return A_bar, B_bar


def design_servo_gains(q_weight=10.0, r_weight=1.0) -> ServoGains:
    """LQR gains for the integral servo (constant commands).

    The Riccati gain K_lqr stabilizes with u = -K_lqr x; the stored split is
    negated so the servo law reads v = k_x x + k_q q with plus signs.
    """
    A_bar, B_bar = augmented_servo_system()
    prob = LqrProblem(A_bar, B_bar, _as_weight(q_weight, 6), _as_weight(r_weight, 2))
    _P, K_lqr = care_solve(prob)
    return ServoGains(k_x=-K_lqr[:, :4], k_q=-K_lqr[:, 4:])


def design_tracking_gain(q_weight=10.0, r_weight=1.0) -> np.ndarray:
    """Gain K with A_C + B_C K Hurwitz for the time-varying tracking law."""
    prob = LqrProblem(A_C, B_C, _as_weight(q_weight, 4), _as_weight(r_weight, 2))
    _P, K_lqr = care_solve(prob)
    return -K_lqr


def servo_step(gains: ServoGains, x, r, y, q, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Servo output v = k_x x + k_q q and the integrator advanced by q_dot = r - y."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    v = gains.k_x @ x + gains.k_q @ q
    return v, q + dt * (r - y)


def tracking_v(K, x, x_d, x_d_dot) -> np.ndarray:
    """Tracking law K (x - x_d) + B_C' x_d_dot; the second term extracts r_ddot."""
    x = np.asarray(x, dtype=float)
    x_d = np.asarray(x_d, dtype=float)
    x_d_dot = np.asarray(x_d_dot, dtype=float)
    return np.asarray(K, dtype=float) @ (x - x_d) + B_C.T @ x_d_dot


class RotorCommand(NamedTuple):
    """Signed rotor speeds plus the squared-speed pair they came from."""

    omega_a: float
    omega_b: float
    Omega: np.ndarray

    @classmethod
    def from_speeds(cls, omega_a: float, omega_b: float) -> "RotorCommand":
        return cls(omega_a, omega_b, np.array([rotor_map(omega_a), rotor_map(omega_b)]))


def adaptive_iol_control(
    state,
    theta_hat,
    v,
    eps_det: float = EPS_DET,
    legacy_sign: bool = False,
    mode: str = "corrected",
) -> RotorCommand:
    """Linearizing feedback computed from the current parameter estimate.

    Solves (G @ Theta2_hat) Omega = -f1 - f2 @ Theta1_hat + v and converts
    Omega back to signed rotor speeds.  `legacy_sign` applies the leading
    minus to the whole bracket including v (which flips the loop sign and is
    kept only for comparison runs).

    Raises SingularControlAuthority when |det(G @ Theta2_hat)| < eps_det.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    B = model.g_matrix(state) @ model.theta2_block(theta_hat)
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    if abs(det) < eps_det:
        raise SingularControlAuthority(
            f"|det(G Theta2_hat)| = {abs(det):.3e} < {eps_det:.1e}"
        )
    drift = model.f1(state, mode) + model.f2(state) @ model.theta1_part(theta_hat)
    v = np.asarray(v, dtype=float)
    w = -(drift + v) if legacy_sign else -drift + v
    Omega = np.array(
        [
            (B[1, 1] * w[0] - B[0, 1] * w[1]) / det,
            (B[0, 0] * w[1] - B[1, 0] * w[0]) / det,
        ]
    )
    omega = rotor_map_inverse(Omega)
    return RotorCommand(float(omega[0]), float(omega[1]), Omega)
