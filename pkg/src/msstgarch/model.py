"""Markov-switching smooth-transition GARCH model family.

Each hidden regime ``j`` carries its own variance recursion

    H[j, t] = a0_j + y[t-1]**2 * d[j, t] + b_j * H[j, t-1]
    d[j, t] = a1_j * (1 - w[j, t-1]) + a2_j * w[j, t-1]
    w[j, t-1] = 1 / (1 + exp(-gamma_j * y[t-1]))

and the observed return is ``y[t] = eps[t] * sqrt(H[z[t], t])`` with
``eps`` i.i.d. standard normal and ``z`` a Markov chain independent of
``eps``. One regime with ``gamma = 0`` is plain GARCH(1, 1); one regime with
``gamma > 0`` is ST-GARCH; several regimes with every ``gamma = 0`` is
MS-GARCH.

Regimes are 0-based inside the library. File outputs use 1-based labels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from . import _kernels
from .errors import DataError, SpecError

PARAM_NAMES = ("a0", "a1", "a2", "b", "gamma")
ROW_SUM_TOL = 1e-12
DEFAULT_BURN_IN = 500


class Variant(str, enum.Enum):
    GARCH = "garch"
    STGARCH = "stgarch"
    MSGARCH = "msgarch"
    MSSTGARCH = "msstgarch"

    @property
    def smooth_transition(self) -> bool:
        return self in (Variant.STGARCH, Variant.MSSTGARCH)

    @property
    def switching(self) -> bool:
        return self in (Variant.MSGARCH, Variant.MSSTGARCH)


@dataclass(frozen=True)
class RegimeParams:
    """Coefficients of one regime's variance recursion.

    ``gamma = 0`` means no smooth transition: the logistic weight is fixed
    at 1/2 and the ARCH coefficient is ``(a1 + a2) / 2``.
    """

    a0: float
    a1: float
    a2: float
    b: float
    gamma: float = 0.0

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise SpecError(f"regime parameters must be finite, got {self}")
        if self.a0 <= 0:
            raise SpecError(f"a0 must be > 0, got {self.a0}")
        for name in ("a1", "a2", "b", "gamma"):
            if getattr(self, name) < 0:
                raise SpecError(f"{name} must be >= 0, got {getattr(self, name)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2, self.b, self.gamma], dtype=float)

    @classmethod
    def from_array(cls, values) -> "RegimeParams":
        a0, a1, a2, b, gamma = (float(v) for v in values)
        return cls(a0, a1, a2, b, gamma)


def validate_transition(P) -> np.ndarray:
    """Return ``P`` as a read-only float array after checking it is a
    primitive (irreducible, aperiodic) stochastic matrix."""
    P = np.array(P, dtype=float, copy=True)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise SpecError(f"transition matrix must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
        raise SpecError("transition probabilities must lie in [0, 1]")
    if np.any(np.abs(P.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise SpecError(f"transition rows must sum to 1, got {P.sum(axis=1)}")
    K = P.shape[0]
    if not np.all(np.linalg.matrix_power(P, K) > 0):
        raise SpecError("transition matrix is not irreducible and aperiodic (P^K has zero entries)")
    P.setflags(write=False)
    return P


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """K regimes plus the transition matrix of the hidden chain."""

    regimes: tuple
    transition: np.ndarray = field(default=None)

    def __post_init__(self):
        regimes = tuple(
            r if isinstance(r, RegimeParams) else RegimeParams.from_array(r) for r in self.regimes
        )
        if not regimes:
            raise SpecError("a model needs at least one regime")
        object.__setattr__(self, "regimes", regimes)
        P = np.ones((1, 1)) if self.transition is None and len(regimes) == 1 else self.transition
        if P is None:
            raise SpecError("a transition matrix is required when K > 1")
        P = validate_transition(P)
        if P.shape[0] != len(regimes):
            raise SpecError(f"{len(regimes)} regimes but transition matrix is {P.shape}")
        object.__setattr__(self, "transition", P)

    @property
    def K(self) -> int:
        return len(self.regimes)

    @property
    def theta(self) -> np.ndarray:
        """Parameters as a ``(K, 5)`` array with columns a0, a1, a2, b, gamma."""
        return np.array([r.as_array() for r in self.regimes])

    @property
    def variant(self) -> Variant:
        smooth = any(r.gamma > 0 for r in self.regimes)
        if self.K == 1:
            return Variant.STGARCH if smooth else Variant.GARCH
        return Variant.MSSTGARCH if smooth else Variant.MSGARCH

    @classmethod
    def from_arrays(cls, theta, P=None) -> "ModelSpec":
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        return cls(tuple(RegimeParams.from_array(row) for row in theta), P)

    def permuted(self, order: Sequence[int]) -> "ModelSpec":
        """Relabel regimes so that new regime ``i`` is old regime ``order[i]``."""
        order = list(order)
        P = np.asarray(self.transition)[np.ix_(order, order)]
        return ModelSpec(tuple(self.regimes[i] for i in order), P)

    def canonical(self) -> "ModelSpec":
        """Same model with regimes sorted by increasing ``a0``."""
        order = sorted(range(self.K), key=lambda j: self.regimes[j].a0)
        return self.permuted(order)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "K": self.K,
            "regimes": [
                {name: float(v) for name, v in zip(PARAM_NAMES, r.as_array())} for r in self.regimes
            ],
            "transition": np.asarray(self.transition).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        try:
            regimes = tuple(
                RegimeParams(**{name: float(r.get(name, 0.0)) for name in PARAM_NAMES})
                for r in d["regimes"]
            )
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed model description: {exc}") from exc
        return cls(regimes, d.get("transition"))


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Log returns in percent, optionally with their timestamps."""

    values: np.ndarray
    dates: Optional[tuple] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).ravel()
        if not np.all(np.isfinite(values)):
            raise DataError("return series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.dates is not None:
            dates = tuple(self.dates)
            if len(dates) != len(values):
                raise DataError(f"{len(dates)} dates for {len(values)} values")
            object.__setattr__(self, "dates", dates)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, item):
        if isinstance(item, slice):
            dates = None if self.dates is None else self.dates[item]
            return ReturnSeries(self.values[item], dates)
        return self.values[item]


def as_array(data) -> np.ndarray:
    if isinstance(data, ReturnSeries):
        return data.values
    y = np.asarray(data, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise DataError("return series contains non-finite values")
    return y


def logistic_weight(gamma, y_prev):
    """Weight on the positive-shock coefficient; exactly 1/2 when gamma = 0."""
    return expit(np.multiply(gamma, y_prev))


def shock_coefficient(params: RegimeParams, y_prev):
    w = logistic_weight(params.gamma, y_prev)
    return params.a1 * (1.0 - w) + params.a2 * w


def regime_variance_step(params: RegimeParams, y_prev, h_prev):
    if np.any(np.asarray(h_prev) <= 0):
        raise SpecError(f"previous variance must be > 0, got {h_prev}")
    return params.a0 + np.square(y_prev) * shock_coefficient(params, y_prev) + params.b * h_prev


def stationary_distribution(P) -> np.ndarray:
    """Solve pi' P = pi' with sum(pi) = 1.

    Raises ``SpecError`` when the stationary vector is not unique.
    """
    P = np.asarray(P, dtype=float)
    K = P.shape[0]
    if K == 1:
        return np.ones(1)
    A = np.vstack([P.T - np.eye(K), np.ones((1, K))])
    rhs = np.zeros(K + 1)
    rhs[-1] = 1.0
    if np.linalg.matrix_rank(A[:-1]) != K - 1:
        raise SpecError("transition matrix has no unique stationary distribution")
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def initial_variances(spec_or_theta, target: Optional[float] = None) -> np.ndarray:
    """Starting variance of every regime.

    The nested-GARCH fixed point ``a0 / (1 - (a1 + a2)/2 - b)`` when that
    denominator exceeds 0.05, else ``target`` (typically the sample variance),
    else 1.
    """
    theta = spec_or_theta.theta if isinstance(spec_or_theta, ModelSpec) else np.atleast_2d(spec_or_theta)
    return _kernels.initial_variances(np.asarray(theta, dtype=float), np.nan if target is None else float(target))


def variance_paths(spec: ModelSpec, data, h_init=None, target=None) -> np.ndarray:
    """All K regime variance paths ``H[j, t]`` implied by observed returns."""
    y = as_array(data)
    h1 = initial_variances(spec, target) if h_init is None else np.asarray(h_init, dtype=float)
    return _kernels.variance_paths(spec.theta, y, h1)


@dataclass(frozen=True, eq=False)
class SimulationResult:
    returns: ReturnSeries
    states: np.ndarray
    variances: np.ndarray  # (K, length)


def simulate(spec: ModelSpec, length: int, rng_seed=None, burn_in: int = DEFAULT_BURN_IN) -> SimulationResult:
    """Draw a return path together with its hidden states and the variance
    path of every regime.

    The first state of the burn-in segment is drawn from the stationary
    distribution; the first ``burn_in`` steps are then discarded.
    """
    if length < 1:
        raise SpecError(f"length must be >= 1, got {length}")
    if burn_in < 0:
        raise SpecError(f"burn_in must be >= 0, got {burn_in}")
    rng = np.random.default_rng(rng_seed)
    n = length + burn_in
    pi = stationary_distribution(spec.transition)
    z0 = int(rng.choice(spec.K, p=pi))
    eps = rng.standard_normal(n)
    u = rng.random(n)
    P = np.ascontiguousarray(spec.transition)
    y, z, H = _kernels.simulate_path(spec.theta, P, eps, u, z0, initial_variances(spec))
    return SimulationResult(ReturnSeries(y[burn_in:]), z[burn_in:].copy(), H[:, burn_in:].copy())


def benchmark_spec() -> ModelSpec:
    """Two-regime model used for the simulation study (low-volatility regime first)."""
    return ModelSpec(
        (
            RegimeParams(a0=0.3, a1=0.2, a2=0.05, b=0.5, gamma=1.5),
            RegimeParams(a0=1.9, a1=0.7, a2=0.1, b=0.25, gamma=0.5),
        ),
        np.array([[0.97, 0.03], [0.15, 0.85]]),
    )
