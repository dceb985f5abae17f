"""Markov-switching smooth-transition GARCH models.

Simulation, forward filtering, second-moment stability checks, Bayesian
estimation by Gibbs sampling, and forecast evaluation (VaR backtests,
Diebold-Mariano tests, DIC).
"""

from .errors import (
    ConfigError,
    DataError,
    FilterError,
    MSSTGarchError,
    NumericalError,
    SamplerError,
    SpecError,
)
from .evaluation import (
    backtest,
    compare_forecasts,
    descriptive_stats,
    dic,
    dm_test,
    lr_cc,
    lr_ind,
    lr_uc,
    mse_mae,
    rolling_forecast,
    violations,
)
from .filtering import (
    FilterState,
    PredictiveDistribution,
    filter_step,
    log_likelihood,
    predictive_quantile,
    run_filter,
)
from .inference import McmcConfig, PosteriorDraws, PriorSpec, posterior_summary, run_gibbs
from .io import ingest
from .model import (
    ModelSpec,
    RegimeParams,
    ReturnSeries,
    Variant,
    benchmark_spec,
    simulate,
    stationary_distribution,
)
from .stability import StabilityReport, build_C, spectral_radius, stability_report, threshold_M

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "FilterError",
    "FilterState",
    "MSSTGarchError",
    "McmcConfig",
    "ModelSpec",
    "NumericalError",
    "PosteriorDraws",
    "PredictiveDistribution",
    "PriorSpec",
    "RegimeParams",
    "ReturnSeries",
    "SamplerError",
    "SpecError",
    "StabilityReport",
    "Variant",
    "backtest",
    "benchmark_spec",
    "build_C",
    "compare_forecasts",
    "descriptive_stats",
    "dic",
    "dm_test",
    "filter_step",
    "ingest",
    "log_likelihood",
    "lr_cc",
    "lr_ind",
    "lr_uc",
    "mse_mae",
    "posterior_summary",
    "predictive_quantile",
    "rolling_forecast",
    "run_filter",
    "run_gibbs",
    "simulate",
    "spectral_radius",
    "stability_report",
    "stationary_distribution",
    "threshold_M",
    "violations",
]
