"""Online identification of the lumped parameter vector.

The regressor identity xi2_dot - f1 = Phi @ Theta is turned into a
derivative-free linear equation by filtering both sides with 1/(s + gamma):

    xi_f  = [s/(s+gamma)] xi2 - [1/(s+gamma)] f1   = Phi_f @ Theta
    Phi_f = [1/(s+gamma)] Phi

The improper branch s/(s+gamma) is realized algebraically as
1 - gamma/(s+gamma), so only measurements of xi2, f1 and Phi are ever needed.
Filtered data is folded into exponentially forgetting matrices

    xi_bar_dot  = -lam * xi_bar  + Phi_f' @ xi_f
    phi_bar_dot = -lam * phi_bar + Phi_f' @ Phi_f

and the estimate moves along the two-power flow

    theta_hat_dot = -c1 * Xi / ||Xi||^(1-alpha1) - c2 * Xi / ||Xi||^(1-alpha2)

with Xi = phi_bar @ theta_hat - xi_bar.  For alpha < 1 the flow reaches
Xi = 0 in finite time under a fixed positive-definite phi_bar; the update
returns zero inside a tiny dead zone around Xi = 0, which is the unique
continuous completion at the flow's own equilibrium.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import model, numerics

EPS_XI = 1e-12


def default_theta_hat0() -> np.ndarray:
    """Stock initial estimate; its 2x2 input-map block is 0.1*I (invertible)."""
    return np.array([1.0, -1.0, 0.1, 0.0, 0.0, 0.1])


@dataclass
class EstimatorConfig:
    """Filter, forgetting, and update-law constants.

    gamma  : filter pole, 1/s
    lam    : exponential forgetting factor, 1/s
    c1, c2 : update gains
    alpha1 : power exponent, must lie in (0, 1)
    alpha2 : power exponent, any positive value is accepted; values <= 1 merge
             the two update terms into a single power law (warned about)
    freeze_theta : hold theta_hat at its initial value (diagnostic runs)
    """

    gamma: float = 1e3
    lam: float = 0.8
    c1: float = 0.1
    c2: float = 0.1
    alpha1: float = 0.5
    alpha2: float = 0.5
    theta_hat0: np.ndarray = field(default_factory=default_theta_hat0)
    freeze_theta: bool = False

    def __post_init__(self):
        self.theta_hat0 = np.asarray(self.theta_hat0, dtype=float)
        problems = []
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            problems.append(f"gamma must be > 0, got {self.gamma!r}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            problems.append(f"lam must be > 0, got {self.lam!r}")
        if not (math.isfinite(self.c1) and self.c1 > 0):
            problems.append(f"c1 must be > 0, got {self.c1!r}")
        if not (math.isfinite(self.c2) and self.c2 > 0):
            problems.append(f"c2 must be > 0, got {self.c2!r}")
        if not 0.0 < self.alpha1 < 1.0:
            problems.append(f"alpha1 must lie in (0, 1), got {self.alpha1!r}")
        if not (math.isfinite(self.alpha2) and self.alpha2 > 0):
            problems.append(f"alpha2 must be > 0, got {self.alpha2!r}")
        if self.theta_hat0.shape != (6,) or not np.all(np.isfinite(self.theta_hat0)):
            problems.append("theta_hat0 must be a finite 6-vector")
        if problems:
            raise ValueError("; ".join(problems))
        if self.alpha2 <= 1.0:
            warnings.warn(
                "alpha2 <= 1 makes both update terms sublinear powers; "
                "with alpha1 == alpha2 they merge into a single gain c1 + c2",
                stacklevel=2,
            )


@dataclass
class EstimatorState:
    """Filter states, data matrices, and the current estimate."""

    lpf_xi2: np.ndarray   # 2,  state of 1/(s+gamma) applied to xi2
    lpf_f1: np.ndarray    # 2,  state of 1/(s+gamma) applied to f1
    lpf_phi: np.ndarray   # 2x6 state of 1/(s+gamma) applied to Phi
    xi_bar: np.ndarray    # 6
    phi_bar: np.ndarray   # 6x6, symmetric PSD from a zero start
    theta_hat: np.ndarray  # 6

    @classmethod
    def initial(cls, theta_hat0) -> "EstimatorState":
        return cls(
            lpf_xi2=np.zeros(2),
            lpf_f1=np.zeros(2),
            lpf_phi=np.zeros((2, 6)),
            xi_bar=np.zeros(6),
            phi_bar=np.zeros((6, 6)),
            theta_hat=np.asarray(theta_hat0, dtype=float).copy(),
        )


def filtered_signals(est: EstimatorState, state, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Current (xi_f, Phi_f) from the filter states and the measured rates.

    xi_f = xi2 - gamma*lpf_xi2 - lpf_f1 realizes s/(s+gamma) without
    differentiating xi2; Phi_f is the low-pass filter state itself.  The
    realized low-pass has DC gain 1/gamma: a constant input c settles at
    c/gamma.
    """
    xi2 = np.asarray(state, dtype=float)[2:4]
    xi_f = xi2 - gamma * est.lpf_xi2 - est.lpf_f1
    return xi_f, est.lpf_phi


def filter_derivatives(
    est: EstimatorState, state, Omega, gamma: float, mode: str = "corrected"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives of the three filter states at the measured (state, Omega)."""
    xi2 = np.asarray(state, dtype=float)[2:4]
    d_lpf_xi2 = -gamma * est.lpf_xi2 + xi2
    d_lpf_f1 = -gamma * est.lpf_f1 + model.f1(state, mode)
    d_lpf_phi = -gamma * est.lpf_phi + model.regressor(state, Omega)
    return d_lpf_xi2, d_lpf_f1, d_lpf_phi


def data_matrix_derivatives(
    xi_bar, phi_bar, xi_f, Phi_f, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides of the forgetting-factor data-matrix ODEs."""
    return -lam * xi_bar + Phi_f.T @ xi_f, -lam * phi_bar + Phi_f.T @ Phi_f


def data_matrix_step(
    est: EstimatorState, xi_f, Phi_f, lam: float, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Advance (xi_bar, phi_bar) one RK4 step with (xi_f, Phi_f) held constant."""
    packed = np.concatenate([est.xi_bar, est.phi_bar.ravel()])

    def rhs(_t, y):
        d_xi, d_phi = data_matrix_derivatives(y[:6], y[6:].reshape(6, 6), xi_f, Phi_f, lam)
        return np.concatenate([d_xi, d_phi.ravel()])

    out = numerics.rk4_step(rhs, packed, 0.0, dt)
    return out[:6], out[6:].reshape(6, 6)


def theta_update(
    est: EstimatorState,
    c1: float,
    c2: float,
    alpha1: float,
    alpha2: float,
    eps_xi: float = EPS_XI,
) -> np.ndarray:
    """Two-power update direction for theta_hat; zero inside the dead zone."""
    Xi = est.phi_bar @ est.theta_hat - est.xi_bar
    norm = float(np.linalg.norm(Xi))
    if norm < eps_xi:
        return np.zeros(6)
    return -c1 * Xi / norm ** (1.0 - alpha1) - c2 * Xi / norm ** (1.0 - alpha2)
