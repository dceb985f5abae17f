"""Forward filtering of regime probabilities and one-step-ahead predictive
distributions.

The predictive density of ``y_t`` given the past is the normal mixture

    f(y_t | I_{t-1}) = sum_j alpha_j(t) * N(y_t; 0, H[j, t])

with ``alpha_j(t) = p(Z_t = j | I_{t-1})``. Each observation updates the
probabilities with Bayes' rule followed by one Markov step. All density
arithmetic is done in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, special, stats

from . import _kernels
from .errors import FilterError, NumericalError
from .model import ModelSpec, as_array, initial_variances, stationary_distribution

LOG_2PI = math.log(2.0 * math.pi)
QUANTILE_SPAN = 12.0
QUANTILE_MAX_EXPANSIONS = 4


@dataclass(frozen=True, eq=False)
class FilterState:
    """Predictive regime probabilities and regime variances for the next
    observation, plus the log mixture density of the last one absorbed."""

    alpha: np.ndarray
    h: np.ndarray
    log_lik_increment: float = 0.0

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if alpha.shape != h.shape or alpha.ndim != 1:
            raise ValueError(f"alpha {alpha.shape} and h {h.shape} must be matching vectors")
        if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-10:
            raise ValueError(f"alpha must be a probability vector, got {alpha}")
        if np.any(h <= 0):
            raise ValueError(f"regime variances must be > 0, got {h}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "h", h)

    @property
    def K(self) -> int:
        return len(self.alpha)


def initial_state(spec: ModelSpec, target: Optional[float] = None) -> FilterState:
    """Stationary regime probabilities and the default starting variances."""
    return FilterState(stationary_distribution(spec.transition), initial_variances(spec, target))


def _log_normal_density(y, h):
    return -0.5 * (LOG_2PI + np.log(h) + y * y / h)


def filter_step(state: FilterState, spec: ModelSpec, y_new: float) -> FilterState:
    """Absorb one observation."""
    if not np.isfinite(y_new):
        raise FilterError("observation is not finite")
    with np.errstate(divide="ignore"):
        c = np.log(state.alpha) + _log_normal_density(y_new, state.h)
    m = c.max()
    if not np.isfinite(m):
        raise FilterError("mixture density underflowed to zero")
    weights = np.exp(c - m)
    s = weights.sum()
    filtered = weights / s
    alpha = filtered @ np.asarray(spec.transition)
    alpha = alpha / alpha.sum()
    theta = spec.theta
    w = special.expit(theta[:, 4] * y_new)
    h = theta[:, 0] + y_new**2 * (theta[:, 1] * (1 - w) + theta[:, 2] * w) + theta[:, 3] * state.h
    return FilterState(alpha, h, float(m + math.log(s)))


@dataclass(frozen=True, eq=False)
class FilterResult:
    """Output of :func:`run_filter`.

    Row ``t`` of ``alpha``/``h`` is the predictive state for observation
    ``t``; the final row is the state after the last observation.
    """

    alpha: np.ndarray
    h: np.ndarray
    log_lik: np.ndarray
    filtered: np.ndarray

    @property
    def total_log_lik(self) -> float:
        return float(self.log_lik.sum())

    def __len__(self):
        return self.alpha.shape[0]

    def __getitem__(self, t) -> FilterState:
        t = range(len(self))[t]
        inc = float(self.log_lik[t - 1]) if t > 0 else 0.0
        return FilterState(self.alpha[t], self.h[t], inc)

    @property
    def final_state(self) -> FilterState:
        return self[-1]

    def conditional_variances(self) -> np.ndarray:
        return np.einsum("tk,tk->t", self.alpha, self.h)


def run_filter(
    spec: ModelSpec,
    data,
    init: Optional[FilterState] = None,
    target: Optional[float] = None,
) -> FilterResult:
    """Filter a whole series.

    Without ``init`` the recursion starts from the stationary distribution of
    the chain and :func:`~msstgarch.model.initial_variances` (``target`` is
    passed there as the fallback starting variance).
    """
    y = as_array(data)
    if init is None:
        init = initial_state(spec, target)
    alpha, H, loglik, filtered, bad = _kernels.forward_filter(
        spec.theta, np.ascontiguousarray(spec.transition), y, init.alpha, init.h
    )
    if bad >= 0:
        raise FilterError("mixture density underflowed to zero", index=int(bad))
    return FilterResult(alpha, H, loglik, filtered)


def log_likelihood(spec: ModelSpec, data, target: Optional[float] = None) -> float:
    return run_filter(spec, data, target=target).total_log_lik


def conditional_variance(state: FilterState) -> float:
    return float(np.dot(state.alpha, state.h))


@dataclass(frozen=True, eq=False)
class PredictiveDistribution:
    """Zero-mean normal mixture."""

    weights: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        sd = np.asarray(self.sd, dtype=float)
        if weights.shape != sd.shape:
            raise ValueError("weights and sd must have the same shape")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
            raise ValueError("weights must form a probability vector")
        if np.any(sd <= 0):
            raise ValueError("component standard deviations must be > 0")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "sd", sd)

    @classmethod
    def from_state(cls, state: FilterState) -> "PredictiveDistribution":
        return cls(state.alpha, np.sqrt(state.h))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        return np.sum(self.weights * stats.norm.pdf(x / self.sd) / self.sd, axis=-1)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        return np.sum(self.weights * special.ndtr(x / self.sd), axis=-1)

    def variance(self) -> float:
        return float(np.dot(self.weights, self.sd**2))

    def quantile(self, prob: float) -> float:
        return predictive_quantile(self, prob)


def predictive_quantile(dist: PredictiveDistribution, prob: float) -> float:
    """Solve ``dist.cdf(q) = prob`` by bracketed root finding."""
    if not 0.0 < prob < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {prob}")
    half = QUANTILE_SPAN * float(dist.sd.max())
    f = lambda q: float(dist.cdf(q)) - prob
    for _ in range(QUANTILE_MAX_EXPANSIONS + 1):
        lo, hi = -half, half
        if f(lo) <= 0.0 <= f(hi):
            break
        half *= 2.0
    else:
        raise NumericalError(f"could not bracket the {prob} quantile")
    return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
