"""Integration and small dense linear-algebra kernels.

Everything here targets n <= 6, so the Lyapunov equation is solved through the
Kronecker-product linear system and eigenvalues come from the dense QR solver.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoStabilizingGain, NonConvergence, NotHurwitz

HURWITZ_TOL = 1e-9


def rk4_step(f, x, t: float, dt: float, k1=None) -> np.ndarray:
    """Classical 4th-order Runge-Kutta step for x_dot = f(t, x).

    `k1` may pass in a precomputed f(t, x) so callers that already evaluated
    the derivative at the step start (e.g. for logging) do not pay twice.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    x = np.asarray(x, dtype=float)
    if k1 is None:
        k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def spectral_abscissa(A) -> float:
    """Largest real part over the eigenvalues of A."""
    return float(np.max(np.linalg.eigvals(np.asarray(A, dtype=float)).real))


def is_hurwitz(A, tol: float = HURWITZ_TOL) -> bool:
    """True when every eigenvalue of A has real part < -tol."""
    return spectral_abscissa(A) < -tol


def lyapunov_solve(A, Q) -> np.ndarray:
    """Solve A' P + P A + Q = 0 for symmetric P (A must be Hurwitz).

    Uses the Kronecker form (I (x) A' + A' (x) I) vec(P) = -vec(Q); at n <= 6
    the dense solve is exact and cheap.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise ValueError(f"shape mismatch: A {A.shape}, Q {Q.shape}")
    if not is_hurwitz(A):
        raise NotHurwitz(f"spectral abscissa {spectral_abscissa(A):.3e} >= 0")
    eye = np.eye(n)
    M = np.kron(eye, A.T) + np.kron(A.T, eye)
    P = np.linalg.solve(M, -Q.flatten(order="F")).reshape((n, n), order="F")
    return 0.5 * (P + P.T)


@dataclass(frozen=True)
class LqrProblem:
    """Continuous-time LQR data: x_dot = A x + B u, cost integrand x'Qx + u'Ru."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != n:
            raise ValueError(f"B must be {n}x m, got {B.shape}")
        m = B.shape[1]
        if Q.shape != (n, n):
            raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
        if R.shape != (m, m):
            raise ValueError(f"R must be {m}x{m}, got {R.shape}")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        if not np.allclose(R, R.T, atol=1e-12):
            raise ValueError("R must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) <= 0.0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


def _stabilizing_gain(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Initial gain K0 with A - B K0 Hurwitz (Bass construction).

    For beta exceeding every |Re(eig(A))|, the Lyapunov solution Z of
    (A + beta I) Z + Z (A + beta I)' = 2 B B' is positive definite whenever
    (A, B) is controllable, and K0 = B' inv(Z) stabilizes A - B K0.
    """
    n = A.shape[0]
    if is_hurwitz(A):
        return np.zeros((B.shape[1], n))
    base = 1.0 + float(np.linalg.norm(A, "fro"))
    for beta in (base, 10.0 * base, 100.0 * base):
        A_shift = -(A + beta * np.eye(n)).T
        try:
            Z = lyapunov_solve(A_shift, 2.0 * B @ B.T)
            K0 = np.linalg.solve(Z, B).T
        except (NotHurwitz, np.linalg.LinAlgError):
            continue
        if np.all(np.isfinite(K0)) and is_hurwitz(A - B @ K0):
            return K0
    raise NoStabilizingGain("Bass construction failed; (A, B) may not be stabilizable")


def care_residual(prob: LqrProblem, P: np.ndarray) -> float:
    """Frobenius norm of A'P + PA - P B inv(R) B' P + Q."""
    A, B, Q, R = prob.A, prob.B, prob.Q, prob.R
    res = A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T @ P) + Q
    return float(np.linalg.norm(res, "fro"))


def care_solve(
    prob: LqrProblem,
    max_iter: int = 60,
    tol: float = 1e-13,
    history: list | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stabilizing CARE solution by Kleinman-Newton iteration.

    Returns (P, K) with P = P' >= 0 solving A'P + PA - P B inv(R) B' P + Q = 0
    and K = inv(R) B' P such that A - B K is Hurwitz.  Each Newton step is one
    Lyapunov solve; from a stabilizing start the iterates P_k decrease
    monotonically.  `history`, when given a list, collects the P_k iterates.

    Raises NoStabilizingGain when no valid start exists and NonConvergence
    when the iteration stalls or the limit fails the residual/Hurwitz checks.
    """
    A, B, Q, R = prob.A, prob.B, prob.Q, prob.R
    K = _stabilizing_gain(A, B)
    P_prev = None
    for _ in range(max_iter):
        A_cl = A - B @ K
        if not is_hurwitz(A_cl):
            raise NonConvergence("Kleinman iterate left the stabilizing set")
        P = lyapunov_solve(A_cl, Q + K.T @ R @ K)
        if history is not None:
            history.append(P)
        K = np.linalg.solve(R, B.T @ P)
        if P_prev is not None and np.linalg.norm(P - P_prev, "fro") <= tol * max(
            1.0, np.linalg.norm(P, "fro")
        ):
            break
        P_prev = P
    else:
        raise NonConvergence(f"no Riccati fixed point after {max_iter} iterations")
    P = 0.5 * (P + P.T)
    if care_residual(prob, P) >= 1e-8 or not is_hurwitz(A - B @ K):
        raise NonConvergence("iteration limit is not a stabilizing Riccati solution")
    return P, K
