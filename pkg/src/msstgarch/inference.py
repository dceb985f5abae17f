"""Bayesian estimation by Gibbs sampling.

One sweep draws, in order,

1. the state path by forward filtering and backward sampling,
2. the diagonal transition probabilities from their conjugate beta
   conditionals,
3. each scalar regime parameter by griddy Gibbs: the conditional kernel is
   tabulated on a fixed grid over its uniform prior interval, integrated by
   the trapezoid rule and inverted by linear interpolation.

Regime labels are identified after sampling by sorting on ``a0`` (low
volatility regime first).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import ConfigError, FilterError, SamplerError, SpecError
from .model import (
    PARAM_NAMES,
    ModelSpec,
    Variant,
    as_array,
    stationary_distribution,
)

logger = logging.getLogger(__name__)

A0, A1, A2, B, GAMMA = range(5)

DEFAULT_BOUNDS = {
    "a0": (1e-3, 5.0),
    "a1": (0.0, 2.0),
    "a2": (0.0, 2.0),
    "b": (0.0, 0.999),
    "gamma": (1e-2, 10.0),
}
DEFAULT_BETA = (8.0, 2.0)
INITIAL_ETA = 0.9
MIN_OBSERVATIONS = 50
MAX_ERROR_RATE = 0.01


def parameter_names(K: int) -> list:
    names = [f"{p}_{j + 1}" for j in range(K) for p in PARAM_NAMES]
    if K > 1:
        names += [f"eta_{j + 1}{j + 1}" for j in range(K)]
    return names


def _variant_for(K: int, variant) -> Variant:
    if variant is None:
        return Variant.STGARCH if K == 1 else Variant.MSSTGARCH
    variant = Variant(variant)
    if variant.switching != (K > 1):
        raise ConfigError(f"variant {variant.value} is inconsistent with K={K}")
    return variant


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Independent uniform priors on regime parameters and beta priors on
    the diagonal transition probabilities.

    ``bounds`` has shape ``(K, 5, 2)``. For the symmetric variants (GARCH,
    MS-GARCH) gamma is held at 0 and ``a2`` is tied to ``a1``, so ``a1`` is
    the ARCH coefficient.
    """

    bounds: np.ndarray
    beta: np.ndarray
    variant: Variant = Variant.MSSTGARCH
    leverage: bool = False

    def __post_init__(self):
        bounds = np.array(self.bounds, dtype=float)
        beta = np.array(self.beta, dtype=float)
        variant = Variant(self.variant)
        if bounds.ndim != 3 or bounds.shape[1:] != (5, 2):
            raise ConfigError(f"bounds must have shape (K, 5, 2), got {bounds.shape}")
        K = bounds.shape[0]
        _variant_for(K, variant)
        if beta.shape != (K, 2) or np.any(beta <= 0):
            raise ConfigError("beta hyperparameters must be positive with shape (K, 2)")
        lo, hi = bounds[..., 0], bounds[..., 1]
        free = self.free_mask(K, variant)
        if np.any(~np.isfinite(bounds)) or np.any((lo >= hi) & free):
            raise ConfigError("every prior interval needs lower < upper")
        if np.any(lo[:, A0] <= 0) or np.any(lo[:, A1:GAMMA] < 0):
            raise ConfigError("prior support must respect a0 > 0 and a1, a2, b >= 0")
        if variant.smooth_transition and np.any(lo[:, GAMMA] <= 0):
            raise ConfigError("smooth-transition variants need a gamma lower bound > 0")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "variant", variant)

    @property
    def K(self) -> int:
        return self.bounds.shape[0]

    @staticmethod
    def free_mask(K: int, variant: Variant) -> np.ndarray:
        mask = np.ones((K, 5), dtype=bool)
        if not Variant(variant).smooth_transition:
            mask[:, A2] = False
            mask[:, GAMMA] = False
        return mask

    @property
    def free(self) -> np.ndarray:
        return self.free_mask(self.K, self.variant)

    @classmethod
    def default(cls, K: int = 2, variant=None, leverage: bool = False, **overrides) -> "PriorSpec":
        """Wide default intervals; ``overrides`` maps a parameter name
        (``"a0"``) or a regime-specific name (``"a0_2"``) to ``(lower, upper)``."""
        variant = _variant_for(K, variant)
        bounds = np.array([[DEFAULT_BOUNDS[p] for p in PARAM_NAMES] for _ in range(K)], dtype=float)
        beta = np.tile(DEFAULT_BETA, (K, 1))
        for key, value in overrides.items():
            if key.startswith("eta"):
                j = int(key.split("_")[1][0]) - 1
                beta[j] = value
                continue
            name, _, regime = key.partition("_")
            if name not in PARAM_NAMES:
                raise ConfigError(f"unknown prior parameter {key!r}")
            rows = range(K) if not regime else [int(regime) - 1]
            for j in rows:
                bounds[j, PARAM_NAMES.index(name)] = value
        return cls(bounds, beta, variant, leverage)

    def midpoint_theta(self) -> np.ndarray:
        theta = self.bounds.mean(axis=-1)
        return self.enforce(theta)

    def enforce(self, theta: np.ndarray) -> np.ndarray:
        """Apply the variant's fixed and tied parameters."""
        theta = np.array(theta, dtype=float)
        if not self.variant.smooth_transition:
            theta[:, GAMMA] = 0.0
            theta[:, A2] = theta[:, A1]
        if self.leverage and self.variant.smooth_transition:
            theta[:, A2] = np.minimum(theta[:, A2], theta[:, A1])
        return theta

    def contains(self, theta: np.ndarray, tol: float = 1e-12) -> bool:
        lo, hi = self.bounds[..., 0], self.bounds[..., 1]
        free = self.free
        ok = (theta >= lo - tol) & (theta <= hi + tol)
        return bool(np.all(ok[free]))


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 10_000
    burn_in: int = 5_000
    grid_size: int = 33
    rng_seed: Optional[int] = None
    thinning: int = 1
    store_paths: bool = False

    def __post_init__(self):
        if self.iterations < 1 or self.burn_in < 0 or self.burn_in >= self.iterations:
            raise ConfigError(
                f"need 0 <= burn_in < iterations, got burn_in={self.burn_in}, iterations={self.iterations}"
            )
        if self.grid_size < 3:
            raise ConfigError(f"grid_size must be >= 3, got {self.grid_size}")
        if self.thinning < 1:
            raise ConfigError(f"thinning must be >= 1, got {self.thinning}")

    @property
    def n_retained(self) -> int:
        return -(-(self.iterations - self.burn_in) // self.thinning)


@dataclass(eq=False)
class GibbsState:
    """Mutable sampler state. ``h`` caches the regime variance paths implied
    by ``theta`` and must be refreshed after every parameter change."""

    theta: np.ndarray
    P: np.ndarray
    z: np.ndarray
    h: np.ndarray = field(default=None)
    target: float = np.nan

    @property
    def K(self) -> int:
        return self.theta.shape[0]

    def refresh(self, y: np.ndarray, regime: Optional[int] = None) -> None:
        h1 = _kernels.initial_variances(self.theta, self.target)
        if self.h is None or regime is None:
            self.h = _kernels.variance_paths(self.theta, y, h1)
        else:
            self.h[regime] = _kernels.variance_paths(self.theta[regime:regime + 1], y, h1[regime:regime + 1])[0]


def _target(y: np.ndarray) -> float:
    return float(np.var(y))


def conditional_likelihood(theta, z, data, target: Optional[float] = None) -> float:
    """``log f(Y | theta, Z)``: Gaussian log densities evaluated at the variance
    of the regime active at each time."""
    y = as_array(data)
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    z = np.asarray(z, dtype=np.int64)
    if z.shape != y.shape:
        raise ValueError(f"state path length {z.shape} does not match data {y.shape}")
    if np.any((z < 0) | (z >= theta.shape[0])):
        raise ValueError("state labels out of range")
    t = _target(y) if target is None else float(target)
    total = 0.0
    for j in range(theta.shape[0]):
        if theta[j, A0] <= 0:
            raise SpecError("regime variance is not positive")
        total += _kernels.regime_loglik(theta[j], y, z == j, t)
    return float(total)


def filtered_probabilities(theta, P, y, initial=None, target=np.nan) -> np.ndarray:
    """p(z_t | y_1..y_t) for every t."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    P = np.ascontiguousarray(P, dtype=float)
    alpha0 = stationary_distribution(P) if initial is None else np.asarray(initial, dtype=float)
    h1 = _kernels.initial_variances(theta, target)
    _, _, _, filtered, bad = _kernels.forward_filter(theta, P, y, alpha0, h1)
    if bad >= 0:
        raise FilterError("filtered probabilities degenerated", index=int(bad))
    return filtered


def sample_states(state: GibbsState, data, rng: np.random.Generator, initial=None) -> np.ndarray:
    """Forward-filter, backward-sample a new state path.

    The forward pass starts from the stationary distribution of ``state.P``
    unless ``initial`` is given.
    """
    y = as_array(data)
    filtered = filtered_probabilities(state.theta, state.P, y, initial, state.target)
    u = rng.random((len(y), state.K))
    z, bad = _kernels.backward_sample(filtered, np.ascontiguousarray(state.P, dtype=float), u)
    if bad >= 0:
        raise SamplerError(f"backward sampling met an all-zero distribution at t={bad}")
    return z


def transition_counts(z, K: int) -> np.ndarray:
    z = np.asarray(z, dtype=np.int64)
    n = np.zeros((K, K), dtype=np.int64)
    if len(z) > 1:
        np.add.at(n, (z[:-1], z[1:]), 1)
    return n


def sample_transitions(z, priors: PriorSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw the transition matrix given a state path.

    For two regimes ``eta_ii ~ Beta(c_i1 + n_ii, c_i2 + n_ij)`` and the
    off-diagonal entries are the complements.
    """
    K = priors.K
    if K == 1:
        return np.ones((1, 1))
    if K != 2:
        raise ConfigError("the transition block is only defined for two regimes")
    n = transition_counts(z, K)
    P = np.empty((2, 2))
    for i in range(2):
        other = 1 - i
        eta = rng.beta(priors.beta[i, 0] + n[i, i], priors.beta[i, 1] + n[i, other])
        P[i, i] = eta
        P[i, other] = 1.0 - eta
    return P


def _griddy_invert(grid: np.ndarray, log_k: np.ndarray, u: float) -> float:
    finite = np.isfinite(log_k)
    if not finite.any():
        raise SamplerError("kernel is zero on the whole grid")
    kern = np.zeros_like(log_k)
    kern[finite] = np.exp(log_k[finite] - log_k[finite].max())
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (kern[1:] + kern[:-1]) * np.diff(grid))))
    total = cdf[-1]
    if not total > 0:
        raise SamplerError("kernel integrates to zero")
    x = float(np.interp(u * total, cdf, grid))
    return min(max(x, grid[0]), grid[-1])


def griddy_gibbs_draw(
    target_log_kernel: Callable[[float], float],
    interval,
    G: int,
    rng: np.random.Generator,
) -> float:
    """One draw from a scalar density known up to a constant on ``interval``."""
    lo, hi = (float(v) for v in interval)
    if G < 3:
        raise ValueError(f"grid size must be >= 3, got {G}")
    if not lo < hi:
        raise ValueError(f"empty interval ({lo}, {hi})")
    grid = np.linspace(lo, hi, G)
    log_k = np.array([target_log_kernel(x) for x in grid], dtype=float)
    if np.any(np.isnan(log_k)):
        raise SamplerError("log kernel returned NaN")
    return _griddy_invert(grid, log_k, rng.random())


def _axis_interval(state: GibbsState, priors: PriorSpec, j: int, p: int):
    lo, hi = priors.bounds[j, p]
    if priors.leverage and priors.variant.smooth_transition:
        if p == A2:
            hi = min(hi, state.theta[j, A1])
        elif p == A1:
            lo = max(lo, state.theta[j, A2])
    return lo, hi


def sample_theta(
    state: GibbsState,
    data,
    priors: PriorSpec,
    G: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Update every free scalar of ``theta`` in the order a0, a1, a2, b, gamma
    of regime 1, then regime 2, each from its griddy-Gibbs conditional given
    the freshest values of the others. Updates ``state`` in place and returns
    the new ``theta``."""
    y = as_array(data)
    free = priors.free
    tied = not priors.variant.smooth_transition
    for j in range(state.K):
        active = state.z == j
        for p in range(5):
            if not free[j, p]:
                continue
            lo, hi = _axis_interval(state, priors, j, p)
            if hi - lo <= 0:
                state.theta[j, p] = lo
            else:
                grid = np.linspace(lo, hi, G)
                params = np.repeat(state.theta[j][None, :], G, axis=0)
                params[:, p] = grid
                if tied and p == A1:
                    params[:, A2] = grid
                if p == GAMMA:
                    log_k = _kernels.regime_loglik_grid(params, y, active, state.target)
                else:
                    log_k = _kernels.regime_loglik_grid_fixed_w(params, y, active, state.target)
                try:
                    value = _griddy_invert(grid, log_k, rng.random())
                except SamplerError as exc:
                    raise SamplerError(f"{PARAM_NAMES[p]}_{j + 1}: {exc}") from exc
                state.theta[j, p] = value
            if tied and p == A1:
                state.theta[j, A2] = state.theta[j, A1]
        state.refresh(y, j)
    return state.theta


def identify(theta: np.ndarray, P: np.ndarray, z: Optional[np.ndarray] = None):
    """Relabel so that ``a0`` is nondecreasing across regimes.

    Returns ``(theta, P, z, swapped)``; applying it twice equals applying it once.
    """
    order = np.argsort(theta[:, A0], kind="stable")
    swapped = bool(np.any(order != np.arange(len(order))))
    if not swapped:
        return theta, P, z, False
    inverse = np.empty_like(order)
    inverse[order] = np.arange(len(order))
    theta = theta[order]
    P = P[np.ix_(order, order)]
    if z is not None:
        z = inverse[z]
    return theta, P, z, True


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """Retained draws after burn-in and thinning, already relabeled."""

    theta: np.ndarray  # (n, K, 5)
    P: np.ndarray  # (n, K, K)
    loglik: np.ndarray  # (n,) log f(Y | theta, Z)
    state_freq: np.ndarray  # (T, K) share of retained draws in each regime
    relabeled: np.ndarray  # (n,) bool
    variant: Variant
    paths: Optional[np.ndarray] = None  # (n, T) when stored
    n_errors: int = 0

    @property
    def K(self) -> int:
        return self.theta.shape[1]

    def __len__(self):
        return self.theta.shape[0]

    @property
    def names(self) -> list:
        return parameter_names(self.K)

    def matrix(self) -> np.ndarray:
        """One row per draw, columns as in :attr:`names`."""
        cols = [self.theta.reshape(len(self), -1)]
        if self.K > 1:
            cols.append(np.stack([self.P[:, j, j] for j in range(self.K)], axis=1))
        return np.hstack(cols)

    def spec_at(self, i: int) -> ModelSpec:
        return ModelSpec.from_arrays(self.theta[i], self.P[i])

    def posterior_mean_spec(self) -> ModelSpec:
        P = self.P.mean(axis=0)
        P = P / P.sum(axis=1, keepdims=True)
        return ModelSpec.from_arrays(self.theta.mean(axis=0), P)


def run_gibbs(
    data,
    priors: Optional[PriorSpec] = None,
    config: Optional[McmcConfig] = None,
    K: int = 2,
    progress: Optional[Callable[[int], None]] = None,
) -> PosteriorDraws:
    """Run one chain and return the retained, relabeled draws."""
    y = as_array(data)
    if len(y) < MIN_OBSERVATIONS:
        raise ConfigError(f"need at least {MIN_OBSERVATIONS} observations, got {len(y)}")
    if K not in (1, 2):
        raise ConfigError(f"the sampler supports K in {{1, 2}}, got {K}")
    priors = PriorSpec.default(K) if priors is None else priors
    config = McmcConfig() if config is None else config
    if priors.K != K:
        raise ConfigError(f"priors describe {priors.K} regimes, K={K}")
    rng = np.random.default_rng(config.rng_seed)
    target = _target(y)

    P0 = np.full((K, K), (1.0 - INITIAL_ETA) / max(K - 1, 1))
    np.fill_diagonal(P0, INITIAL_ETA if K > 1 else 1.0)
    state = GibbsState(priors.midpoint_theta(), P0, np.zeros(len(y), dtype=np.int64), target=target)
    state.refresh(y)
    state.z = sample_states(state, y, rng)

    n_keep = config.n_retained
    T = len(y)
    theta_out = np.empty((n_keep, K, 5))
    P_out = np.empty((n_keep, K, K))
    loglik_out = np.empty(n_keep)
    relabeled = np.zeros(n_keep, dtype=bool)
    counts = np.zeros((T, K))
    paths = np.empty((n_keep, T), dtype=np.int8) if config.store_paths else None
    max_errors = MAX_ERROR_RATE * config.iterations
    n_errors = 0
    kept = 0

    for r in range(config.iterations):
        try:
            state.z = sample_states(state, y, rng)
            state.P = sample_transitions(state.z, priors, rng)
            sample_theta(state, y, priors, config.grid_size, rng)
        except (SamplerError, FilterError) as exc:
            n_errors += 1
            logger.warning("sweep %d failed: %s", r, exc)
            state.refresh(y)
            if n_errors > max_errors:
                raise SamplerError(
                    f"{n_errors} of {r + 1} sweeps failed (limit {MAX_ERROR_RATE:.0%}); last error: {exc}"
                ) from exc
            continue
        if r >= config.burn_in and (r - config.burn_in) % config.thinning == 0:
            theta, P, z, swapped = identify(state.theta.copy(), state.P.copy(), state.z)
            theta_out[kept] = theta
            P_out[kept] = P
            relabeled[kept] = swapped
            loglik_out[kept] = conditional_likelihood(theta, z, y, target)
            counts[np.arange(T), z] += 1
            if paths is not None:
                paths[kept] = z
            kept += 1
        if progress is not None:
            progress(r)

    sl = slice(0, kept)
    return PosteriorDraws(
        theta=theta_out[sl],
        P=P_out[sl],
        loglik=loglik_out[sl],
        state_freq=counts / max(kept, 1),
        relabeled=relabeled[sl],
        variant=priors.variant,
        paths=None if paths is None else paths[sl],
        n_errors=n_errors,
    )


def posterior_summary(draws) -> dict:
    """Mean, standard deviation (divisor n - 1) and 5/50/95% quantiles per
    parameter, plus the share of draws that already satisfied the
    identification ordering before relabeling.

    ``draws`` may also be a plain ``(n, p)`` array or a dict of 1-D arrays.
    """
    if isinstance(draws, PosteriorDraws):
        names, X = draws.names, draws.matrix()
        rate = float(1.0 - draws.relabeled.mean()) if len(draws) else float("nan")
    elif isinstance(draws, dict):
        names = list(draws)
        X = np.column_stack([np.asarray(draws[k], dtype=float) for k in names])
        rate = None
    else:
        X = np.asarray(draws, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        names = [f"x{i}" for i in range(X.shape[1])]
        rate = None
    if X.shape[0] == 0:
        raise ValueError("no draws to summarize")
    sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    q = np.quantile(X, [0.05, 0.5, 0.95], axis=0)
    params = {
        name: {
            "mean": float(X[:, i].mean()),
            "sd": float(sd[i]),
            "q05": float(q[0, i]),
            "q50": float(q[1, i]),
            "q95": float(q[2, i]),
        }
        for i, name in enumerate(names)
    }
    return {"parameters": params, "identification_rate": rate, "n_draws": int(X.shape[0])}
