"""Second-moment stability check.

For a small ``delta > 0`` the regime-conditional expected variances obey
the linear recursion ``A_t <= Omega_stacked + C A_{t-1}`` where ``C`` is a
``K^2 x K^2`` nonnegative matrix. When its spectral radius is below one,
``lim E(y_t^2)`` is bounded by ``Pi' (I - C)^{-1} Omega_stacked``.

Vector layout: component ``k*K + m`` of ``A_t`` is E[H_{m,t} | Z_t = k].
Block row ``k``, block column ``j`` of ``C`` is

    p(Z_{t-1} = j | Z_t = k) * (u e_j' + diag(b))

with ``u_m = a1_m + (delta + 1/2) |a2_m - a1_m|``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import NumericalError, SpecError
from .model import ModelSpec, stationary_distribution

DEFAULT_DELTA = 1e-6
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000


def _check_delta(delta):
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 0.5), got {delta}")


def threshold_M(spec: ModelSpec, delta: float = DEFAULT_DELTA) -> float:
    """Smallest M such that every logistic weight is within ``delta`` of its
    limit once ``|y| >= M``.

    Only regimes with ``gamma > 0`` and ``a1 != a2`` matter; returns 0 when
    there are none.
    """
    _check_delta(delta)
    theta = spec.theta
    relevant = (theta[:, 4] > 0) & (np.abs(theta[:, 2] - theta[:, 1]) > 0)
    if not relevant.any():
        return 0.0
    return float(math.log((1.0 - delta) / delta) / theta[relevant, 4].min())


def _backward_probs(spec: ModelSpec) -> np.ndarray:
    """``R[j, k] = p(Z_{t-1} = j | Z_t = k)`` under the stationary law."""
    pi = stationary_distribution(spec.transition)
    if np.any(pi <= 0):
        raise SpecError("stationary distribution has a zero component")
    P = np.asarray(spec.transition)
    return pi[:, None] * P / pi[None, :]


def build_C(spec: ModelSpec, delta: float = DEFAULT_DELTA) -> np.ndarray:
    _check_delta(delta)
    theta = spec.theta
    K = spec.K
    u = theta[:, 1] + (delta + 0.5) * np.abs(theta[:, 2] - theta[:, 1])
    v = np.diag(theta[:, 3])
    R = _backward_probs(spec)
    C = np.zeros((K * K, K * K))
    eye = np.eye(K)
    for k in range(K):
        for j in range(K):
            C[k * K:(k + 1) * K, j * K:(j + 1) * K] = R[j, k] * (np.outer(u, eye[j]) + v)
    return C


def spectral_radius(matrix, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Perron root of a square nonnegative matrix by power iteration.

    Iterates on ``A + I``: for nonnegative ``A`` its dominant eigenvalue is
    ``rho(A) + 1`` and it has no competing eigenvalue of equal modulus, so
    periodic matrices such as permutations converge too.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if np.any(A < 0):
        raise ValueError("matrix must be nonnegative")
    n = A.shape[0]
    x = np.full(n, 1.0 / math.sqrt(n))
    lam_prev = math.inf
    for _ in range(max_iter):
        y = A @ x + x
        lam = float(x @ y) - 1.0
        norm = np.linalg.norm(y)
        x = y / norm
        if abs(lam - lam_prev) <= tol * max(1.0, abs(lam)):
            return max(float(x @ (A @ x)), 0.0)
        lam_prev = lam
    raise NumericalError(f"power iteration did not converge in {max_iter} iterations")


@dataclass(frozen=True)
class StabilityReport:
    spectral_radius: float
    is_stable: bool
    delta: float
    M: float
    bound: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def stability_report(spec: ModelSpec, delta: float = DEFAULT_DELTA) -> StabilityReport:
    """Spectral radius of ``C`` and, when below one, the asymptotic bound on
    ``E(y_t^2)`` in squared-return units."""
    K = spec.K
    theta = spec.theta
    M = threshold_M(spec, delta)
    C = build_C(spec, delta)
    rho = spectral_radius(C)
    if rho >= 1.0:
        return StabilityReport(rho, False, delta, M, None)
    omega = theta[:, 0] + np.abs(theta[:, 2] - theta[:, 1]) * M**2
    omega_stacked = np.tile(omega, K)
    pi = stationary_distribution(spec.transition)
    Pi = np.zeros(K * K)
    for k in range(K):
        Pi[k * K + k] = pi[k]
    try:
        x = np.linalg.solve(np.eye(K * K) - C, omega_stacked)
    except np.linalg.LinAlgError:
        return StabilityReport(rho, False, delta, M, None)
    return StabilityReport(rho, True, delta, M, float(Pi @ x))
