"""Ground-truth plant for the dual-rotor rotational rig.

A rigid arm holds two tilted rotors and pivots about a ball joint with two
degrees of freedom: phi_v (vertical-plane angle) and phi_h (horizontal-plane
angle).  State layout used everywhere: x = [phi_v, phi_h, phi_v_dot,
phi_h_dot], rad and rad/s.

There is no gravity and no friction in this model; with zero rotor speeds and
zero rates every orientation is an equilibrium.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularityError

# Orientation guard: sec(phi_v) diverges at pi/2, so the model rejects states
# with |phi_v| >= pi/2 - EPS_SING instead of returning unbounded values.
EPS_SING = 0.01
PHI_V_LIMIT = math.pi / 2 - EPS_SING

# Equation-of-motion variants for the horizontal channel.  "corrected" carries
# the rate product sin(phi_v)*phi_v_dot*phi_h_dot in the transport term;
# "legacy" keeps the dimensionally inconsistent sin(phi_v)*phi_h_dot variant
# for comparison runs.  Plant, strict-feedback model, and estimator all share
# the selected variant, so either one is self-consistent.
PHYSICS_MODES = ("corrected", "legacy")


@dataclass(frozen=True)
class PhysicalParams:
    """Inertial and rotor parameters of the rig.

    J1, J2, J3 : principal moments of inertia, kg m^2 (J1 along the arm)
    ell        : rotor arm half-length, m
    k_f        : thrust coefficient, N s^2 / rad^2
    k_tau      : reaction-torque coefficient, N m s^2 / rad^2
    beta_a/b   : rotor tilt angles about the arm axis, rad (any finite value)
    """

    J1: float
    J2: float
    J3: float
    ell: float
    k_f: float
    k_tau: float
    beta_a: float
    beta_b: float

    def __post_init__(self):
        for name in ("J1", "J2", "J3", "ell", "k_f", "k_tau"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        for name in ("beta_a", "beta_b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def default_params() -> PhysicalParams:
    """Nominal bench parameters used by every stock scenario."""
    return PhysicalParams(
        J1=6.25e-4,
        J2=0.02,
        J3=0.02,
        ell=1.0,
        k_f=4e-3,
        k_tau=7.5e-4,
        beta_a=math.pi / 4,
        beta_b=-math.pi / 4,
    )


def check_guard(phi_v: float) -> None:
    """Raise SingularityError when |phi_v| is outside the guarded range."""
    if not abs(phi_v) < PHI_V_LIMIT:
        raise SingularityError(
            f"|phi_v| = {abs(phi_v):.6f} rad exceeds the guard pi/2 - {EPS_SING}"
        )


def check_mode(mode: str) -> None:
    if mode not in PHYSICS_MODES:
        raise ValueError(f"physics mode must be one of {PHYSICS_MODES}, got {mode!r}")


def rotor_map(omega):
    """Signed squared speed p(omega) = omega*|omega| (odd, strictly increasing)."""
    return omega * np.abs(omega)


def rotor_map_inverse(Omega):
    """Inverse of rotor_map: sign(Omega)*sqrt(|Omega|)."""
    return np.sign(Omega) * np.sqrt(np.abs(Omega))


def allocation_matrix(params: PhysicalParams) -> np.ndarray:
    """2x2 map from [p(omega_a), p(omega_b)] to the moments [M_v, M_h].

    Row 1 collects thrust-lever and reaction-torque contributions in the
    vertical channel, row 2 in the horizontal channel.  Singular exactly when
    beta_a - beta_b is a multiple of pi.
    """
    ca, sa = math.cos(params.beta_a), math.sin(params.beta_a)
    cb, sb = math.cos(params.beta_b), math.sin(params.beta_b)
    kfl, kt = params.k_f * params.ell, params.k_tau
    return np.array(
        [
            [kfl * ca - kt * sa, -kfl * cb + kt * sb],
            [kfl * sa + kt * ca, -kfl * sb - kt * cb],
        ]
    )


def allocation_determinant(params: PhysicalParams) -> float:
    """Closed form of det(allocation_matrix): (ell^2 k_f^2 + k_tau^2) sin(beta_a - beta_b)."""
    return (params.ell**2 * params.k_f**2 + params.k_tau**2) * math.sin(
        params.beta_a - params.beta_b
    )


def moments(params: PhysicalParams, omega_a: float, omega_b: float) -> tuple[float, float]:
    """Moments (M_v, M_h) in N m produced by signed rotor speeds in rad/s."""
    Omega = np.array([rotor_map(omega_a), rotor_map(omega_b)])
    M = allocation_matrix(params) @ Omega
    return float(M[0]), float(M[1])


def plant_derivative(
    params: PhysicalParams,
    state,
    omega_a: float,
    omega_b: float,
    mode: str = "corrected",
) -> np.ndarray:
    """Time derivative of [phi_v, phi_h, phi_v_dot, phi_h_dot].

    Vertical channel: J2*phi_v_ddot + (J3 - J1) sin cos * phi_h_dot^2 = M_v.
    Horizontal channel: J3*(cos * phi_h_ddot - transport) +
    (J1 - J2) sin * phi_v_dot * phi_h_dot = M_h, where the transport term is
    sin*phi_v_dot*phi_h_dot ("corrected") or sin*phi_h_dot ("legacy").
    """
    check_mode(mode)
    phi_v, _phi_h, phi_v_dot, phi_h_dot = (float(s) for s in state)
    check_guard(phi_v)
    M_v, M_h = moments(params, omega_a, omega_b)
    sv, cv = math.sin(phi_v), math.cos(phi_v)
    phi_v_ddot = (M_v - (params.J3 - params.J1) * sv * cv * phi_h_dot**2) / params.J2
    if mode == "corrected":
        transport = sv * phi_v_dot * phi_h_dot
    else:
        transport = sv * phi_h_dot
    phi_h_ddot = (
        M_h - (params.J1 - params.J2) * sv * phi_v_dot * phi_h_dot + params.J3 * transport
    ) / (params.J3 * cv)
    return np.array([phi_v_dot, phi_h_dot, phi_v_ddot, phi_h_ddot])


def theta_true(params: PhysicalParams) -> np.ndarray:
    """Lumped parameter 6-vector [Theta1(1), Theta1(2), Theta2 row-major].

    Theta1 holds the inertia ratios; Theta2 is the allocation matrix with its
    rows divided by J2 and J3 respectively.
    """
    C = allocation_matrix(params)
    return np.array(
        [
            (params.J1 - params.J3) / params.J2,
            (params.J2 - params.J1) / params.J3,
            C[0, 0] / params.J2,
            C[0, 1] / params.J2,
            C[1, 0] / params.J3,
            C[1, 1] / params.J3,
        ]
    )
