"""Model comparison and forecast evaluation.

Covers the deviance information criterion, rolling one-step-ahead
forecasts, value-at-risk violation backtests (unconditional coverage,
independence and conditional coverage likelihood ratios), the
Diebold-Mariano test on squared-error losses, and MSE/MAE of variance
forecasts against squared returns.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DataError
from .filtering import PredictiveDistribution, predictive_quantile, run_filter
from .inference import PosteriorDraws
from .model import as_array

NA = float("nan")
DEFAULT_LEVELS = (0.99, 0.95, 0.9, 0.1, 0.05, 0.01)


def _is_na(x) -> bool:
    return x is None or (isinstance(x, float) and math.isnan(x))


def _json_value(x):
    if _is_na(x):
        return "NA"
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return x


def _fmt(x, digits=3):
    return "NA" if _is_na(x) else f"{x:.{digits}f}"


# ---------------------------------------------------------------- forecasts


@dataclass(frozen=True, eq=False)
class ForecastResult:
    """One-step-ahead forecasts for the out-of-sample days ``split..T-1``."""

    variance: np.ndarray
    weights: np.ndarray
    sd: np.ndarray
    realized: np.ndarray
    start: int

    def __len__(self):
        return len(self.variance)

    def distribution(self, i: int) -> PredictiveDistribution:
        return PredictiveDistribution(self.weights[i], self.sd[i])

    @property
    def distributions(self) -> list:
        return [self.distribution(i) for i in range(len(self))]


def rolling_forecast(model, data, split: int, target: Optional[float] = None) -> ForecastResult:
    """Filter through the estimation window and emit, for each later day,
    the predictive mixture and variance before that day's return is absorbed.

    ``model`` is a :class:`ModelSpec` or :class:`PosteriorDraws` (posterior
    means are used). Parameters stay fixed over the forecast window.
    """
    spec = model.posterior_mean_spec() if isinstance(model, PosteriorDraws) else model
    y = as_array(data)
    if not 0 <= split < len(y):
        raise DataError(f"split must lie in [0, {len(y)}), got {split}")
    if target is None and split > 1:
        target = float(np.var(y[:split]))
    res = run_filter(spec, y, target=target)
    alpha = res.alpha[split:len(y)]
    h = res.h[split:len(y)]
    return ForecastResult(
        variance=np.einsum("tk,tk->t", alpha, h),
        weights=alpha,
        sd=np.sqrt(h),
        realized=y[split:].copy(),
        start=split,
    )


# ---------------------------------------------------------------- VaR backtests


def _phi(level: float) -> float:
    return 1.0 - level if level > 0.5 else level


@dataclass(frozen=True, eq=False)
class ViolationSeries:
    level: float
    var_forecasts: np.ndarray
    indicators: np.ndarray

    @classmethod
    def from_indicators(cls, indicators, level: float, var_forecasts=None) -> "ViolationSeries":
        ind = np.asarray(indicators, dtype=np.int8)
        if not np.all((ind == 0) | (ind == 1)):
            raise ValueError("indicators must be 0/1")
        vf = np.full(len(ind), np.nan) if var_forecasts is None else np.asarray(var_forecasts, dtype=float)
        return cls(float(level), vf, ind)

    @classmethod
    def from_counts(cls, n1: int, n: int, level: float) -> "ViolationSeries":
        """A sequence of ``n`` days with ``n1`` violations (placed first)."""
        ind = np.zeros(n, dtype=np.int8)
        ind[:n1] = 1
        return cls.from_indicators(ind, level)

    @property
    def phi(self) -> float:
        return _phi(self.level)

    @property
    def n1(self) -> int:
        return int(self.indicators.sum())

    @property
    def n0(self) -> int:
        return int(len(self.indicators) - self.n1)

    def transitions(self) -> np.ndarray:
        """``n[i, j]`` counts day-to-day moves from state i to state j."""
        n = np.zeros((2, 2), dtype=np.int64)
        ind = self.indicators.astype(np.int64)
        if len(ind) > 1:
            np.add.at(n, (ind[:-1], ind[1:]), 1)
        return n

    @property
    def expected(self) -> float:
        return self.phi * len(self.indicators)


def violations(dists: Sequence[PredictiveDistribution], realized, level: float) -> ViolationSeries:
    """VaR(level) is the (1 - level) quantile of each day's predictive
    distribution. A violation is ``y < VaR`` for level > 0.5 and ``y > VaR``
    for level <= 0.5."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if isinstance(dists, ForecastResult):
        dists = dists.distributions
    y = as_array(realized)
    if len(dists) != len(y):
        raise DataError(f"{len(dists)} forecasts for {len(y)} realized returns")
    var = np.array([predictive_quantile(d, 1.0 - level) for d in dists])
    ind = (y < var) if level > 0.5 else (y > var)
    return ViolationSeries(float(level), var, ind.astype(np.int8))


def _xlogy(x, y):
    return 0.0 if x == 0 else x * math.log(y)


def lr_uc(series: ViolationSeries) -> float:
    """Unconditional coverage statistic (chi-square with one degree of
    freedom). NA when the observed violation rate is 0 or 1."""
    n0, n1 = series.n0, series.n1
    n = n0 + n1
    if n == 0:
        raise ValueError("empty violation series")
    if n1 == 0 or n1 == n:
        return NA
    phi = series.phi
    pi_hat = n1 / n
    ll_null = n1 * math.log(phi) + n0 * math.log(1.0 - phi)
    ll_alt = n1 * math.log(pi_hat) + n0 * math.log(1.0 - pi_hat)
    return max(0.0, -2.0 * (ll_null - ll_alt))


def lr_ind(series: ViolationSeries) -> float:
    """Independence statistic against a first-order Markov alternative.

    Terms of the form ``0 * log 0`` count as zero; the statistic is NA when
    a transition ratio is 0/0 (no day-to-day moves out of one of the states).
    """
    n = series.transitions()
    n00, n01, n10, n11 = (int(v) for v in n.ravel())
    if n00 + n01 == 0 or n10 + n11 == 0:
        return NA
    total = n00 + n01 + n10 + n11
    pi1 = n00 / (n00 + n01)
    pi2 = n11 / (n10 + n11)
    pi_star = (n00 + n10) / total
    ll_null = _xlogy(n00 + n10, pi_star) + _xlogy(n11 + n01, 1.0 - pi_star)
    ll_alt = _xlogy(n00, pi1) + _xlogy(n01, 1.0 - pi1) + _xlogy(n11, pi2) + _xlogy(n10, 1.0 - pi2)
    return max(0.0, -2.0 * (ll_null - ll_alt))


def combine_cc(uc: float, ind: float) -> float:
    return NA if _is_na(uc) or _is_na(ind) else uc + ind


def lr_cc(series: ViolationSeries) -> float:
    return combine_cc(lr_uc(series), lr_ind(series))


@dataclass(frozen=True)
class BacktestRow:
    level: float
    expected: float
    observed: int
    uc: float
    ind: float
    cc: float
    uc_pvalue: float
    ind_pvalue: float
    cc_pvalue: float

    def to_dict(self) -> dict:
        return {k: _json_value(v) for k, v in self.__dict__.items()}


def _pvalue(stat, df):
    return NA if _is_na(stat) else float(stats.chi2.sf(stat, df))


def backtest_row(series: ViolationSeries) -> BacktestRow:
    uc, ind = lr_uc(series), lr_ind(series)
    cc = combine_cc(uc, ind)
    return BacktestRow(
        level=series.level,
        expected=series.expected,
        observed=series.n1,
        uc=uc,
        ind=ind,
        cc=cc,
        uc_pvalue=_pvalue(uc, 1),
        ind_pvalue=_pvalue(ind, 1),
        cc_pvalue=_pvalue(cc, 2),
    )


@dataclass(frozen=True)
class BacktestReport:
    model: str
    rows: tuple

    def to_dict(self) -> dict:
        return {"model": self.model, "rows": [r.to_dict() for r in self.rows]}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_text(self) -> str:
        lines = [f"{'Model':<10} {'alpha':>6} {'E(V)':>6} {'N':>4} {'UC':>8} {'IND':>8} {'CC':>8}"]
        for i, r in enumerate(self.rows):
            name = self.model if i == len(self.rows) // 2 else ""
            lines.append(
                f"{name:<10} {r.level:>6g} {r.expected:>6g} {r.observed:>4d} "
                f"{_fmt(r.uc):>8} {_fmt(r.ind):>8} {_fmt(r.cc):>8}"
            )
        return "\n".join(lines)


def backtest(
    forecasts: ForecastResult,
    levels: Sequence[float] = DEFAULT_LEVELS,
    model: str = "",
    max_workers: Optional[int] = None,
) -> BacktestReport:
    """Backtest every VaR level; levels run on worker threads."""
    dists = forecasts.distributions
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = list(pool.map(lambda a: backtest_row(violations(dists, forecasts.realized, a)), levels))
    return BacktestReport(model, tuple(rows))


# ---------------------------------------------------------------- Diebold-Mariano


@dataclass(frozen=True)
class DMResult:
    statistic: float
    p_value: float
    mean_diff: float
    verdict: str

    def to_dict(self) -> dict:
        return {k: _json_value(v) for k, v in self.__dict__.items()}


def _autocov(d: np.ndarray, lag: int) -> float:
    dc = d - d.mean()
    return float(np.dot(dc[lag:], dc[: len(d) - lag]) / len(d))


def dm_test(errors_1, errors_2, lag: int = 0, hln: bool = False) -> DMResult:
    """Diebold-Mariano test of equal squared-error loss.

    ``H1: E(e1^2 - e2^2) < 0`` (model 1 more accurate); the p-value is the
    standard normal lower tail. The long-run variance of the loss
    differential uses the lag-0 autocovariance plus ``lag`` Bartlett-weighted
    autocovariances. ``hln`` applies the Harvey-Leybourne-Newbold small-sample
    factor with horizon ``lag + 1``.
    """
    e1 = np.asarray(errors_1, dtype=float)
    e2 = np.asarray(errors_2, dtype=float)
    if e1.shape != e2.shape or e1.ndim != 1:
        raise DataError("error sequences must be 1-D with equal lengths")
    T = len(e1)
    if T < 10:
        raise DataError(f"need at least 10 forecast errors, got {T}")
    d = e1**2 - e2**2
    dbar = float(d.mean())
    if np.all(d == 0):
        return DMResult(NA, NA, 0.0, "no difference")
    var = _autocov(d, 0)
    for k in range(1, lag + 1):
        var += 2.0 * (1.0 - k / (lag + 1)) * _autocov(d, k)
    if var <= 0:
        if dbar < 0:
            return DMResult(-math.inf, 0.0, dbar, "model 1 strictly better")
        return DMResult(math.inf, 1.0, dbar, "model 2 strictly better")
    stat = dbar / math.sqrt(var / T)
    if hln:
        h = lag + 1
        stat *= math.sqrt((T + 1 - 2 * h + h * (h - 1) / T) / T)
    p = float(stats.norm.cdf(stat))
    verdict = "model 1 better" if p < 0.05 else ("model 2 better" if p > 0.95 else "no significant difference")
    return DMResult(float(stat), p, dbar, verdict)


def mse_mae(forecast_variances, squared_returns):
    f = np.asarray(forecast_variances, dtype=float)
    s = np.asarray(squared_returns, dtype=float)
    if f.shape != s.shape:
        raise DataError(f"length mismatch: {f.shape} vs {s.shape}")
    if f.size == 0:
        raise DataError("no forecasts to score")
    diff = f - s
    return float(np.mean(diff**2)), float(np.mean(np.abs(diff)))


@dataclass(frozen=True, eq=False)
class ForecastComparison:
    """Variance forecasts of two models scored against squared returns."""

    names: tuple
    errors_1: np.ndarray
    errors_2: np.ndarray
    dm: DMResult
    mse: tuple
    mae: tuple

    @property
    def loss_differential(self) -> np.ndarray:
        return self.errors_1**2 - self.errors_2**2

    def to_dict(self) -> dict:
        return {
            "models": list(self.names),
            "dm": self.dm.to_dict(),
            "mse": dict(zip(self.names, self.mse)),
            "mae": dict(zip(self.names, self.mae)),
        }


def compare_forecasts(f1: ForecastResult, f2: ForecastResult, names=("model_1", "model_2"), **dm_kwargs):
    if len(f1) != len(f2) or not np.array_equal(f1.realized, f2.realized):
        raise DataError("forecasts must cover the same realized returns")
    sq = f1.realized**2
    e1 = f1.variance - sq
    e2 = f2.variance - sq
    m1, a1 = mse_mae(f1.variance, sq)
    m2, a2 = mse_mae(f2.variance, sq)
    return ForecastComparison(tuple(names), e1, e2, dm_test(e1, e2, **dm_kwargs), (m1, m2), (a1, a2))


# ---------------------------------------------------------------- DIC


@dataclass(frozen=True)
class DICResult:
    dic: float
    plugin_log_lik: float
    mean_log_lik: float
    p_d: float

    def to_dict(self) -> dict:
        return {k: _json_value(v) for k, v in self.__dict__.items()}


def dic(draws: PosteriorDraws, data, stride: int = 1) -> DICResult:
    """``DIC = 2 log f(Y | posterior mean) - 4 E[log f(Y | draw)]`` using the
    filter likelihood; lower is better. ``stride`` subsamples draws for the
    expectation term."""
    y = as_array(data)
    if len(draws) == 0:
        raise ValueError("no posterior draws")
    target = float(np.var(y))
    idx = range(0, len(draws), stride)
    lls = np.array([run_filter(draws.spec_at(i), y, target=target).total_log_lik for i in idx])
    plug = run_filter(draws.posterior_mean_spec(), y, target=target).total_log_lik
    mean_ll = float(lls.mean())
    value = 2.0 * plug - 4.0 * mean_ll
    return DICResult(value, plug, mean_ll, 2.0 * (plug - mean_ll))


def dic_from_loglik(plugin_log_lik: float, draw_log_liks) -> float:
    return 2.0 * plugin_log_lik - 4.0 * float(np.mean(draw_log_liks))


# ---------------------------------------------------------------- descriptive statistics


def descriptive_stats(data) -> dict:
    """Mean, standard deviation, skewness, maximum, minimum and (non-excess)
    kurtosis, in the column order of a returns summary table."""
    y = as_array(data)
    if len(y) < 4:
        raise DataError(f"need at least 4 observations, got {len(y)}")
    sd = float(np.std(y, ddof=1))
    if np.ptp(y) == 0:
        skew = kurt = NA
    else:
        skew = float(stats.skew(y))
        kurt = float(stats.kurtosis(y, fisher=False))
    return {
        "mean": float(y.mean()),
        "sd": sd,
        "skewness": skew,
        "max": float(y.max()),
        "min": float(y.min()),
        "kurtosis": kurt,
    }


def descriptive_table(stats_by_name: dict) -> str:
    cols = ("mean", "sd", "skewness", "max", "min", "kurtosis")
    head = f"{'':<14}" + "".join(f"{c:>10}" for c in ("Mean", "Std. dev.", "Skewness", "Maximum", "Minimum", "Kurtosis"))
    lines = [head]
    for name, s in stats_by_name.items():
        lines.append(f"{name:<14}" + "".join(f"{_fmt(s[c]):>10}" for c in cols))
    return "\n".join(lines)
