"""Command-line front end.

    msstgarch simulate  --config run.yaml --out out/
    msstgarch fit       --data out/simulated.csv --column return --split 2000 --out out/
    msstgarch stability --fit out/fit.json
    msstgarch forecast  --fit out/fit.json --data ... --split 2000 --out out/
    msstgarch backtest  --fit out/fit.json --data ... --split 2000 --out out/
    msstgarch compare   --fit a/fit.json --fit b/fit.json --data ... --split 2000 --out out/
    msstgarch summary   --data ... --out out/

Settings come from an optional YAML file with sections ``data``, ``model``,
``prior``, ``mcmc``, ``forecast``, ``simulate``, ``stability`` and
``output``; command-line flags override it. Errors exit nonzero with a
stable code such as ``E_CONFIG`` or ``E_DATA``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import evaluation, io
from .errors import ConfigError, DataError, MSSTGarchError
from .inference import McmcConfig, PriorSpec, posterior_summary, run_gibbs
from .model import ModelSpec, Variant, benchmark_spec, simulate
from .stability import DEFAULT_DELTA, stability_report

logger = logging.getLogger("msstgarch")

VARIANT_K = {Variant.GARCH: 1, Variant.STGARCH: 1, Variant.MSGARCH: 2, Variant.MSSTGARCH: 2}


@dataclass
class RunConfig:
    variant: Variant = Variant.MSSTGARCH
    K: int = 2
    model: Optional[dict] = None
    prior: dict = field(default_factory=dict)
    iterations: int = 10_000
    burn_in: int = 5_000
    grid: int = 33
    thinning: int = 1
    seed: Optional[int] = None
    data: Optional[str] = None
    mode: str = "returns"
    column: Optional[str] = None
    date_column: Optional[str] = None
    split: Optional[int] = None
    levels: tuple = evaluation.DEFAULT_LEVELS
    out: Optional[str] = None
    length: int = 2500
    sim_burn_in: int = 500
    delta: float = DEFAULT_DELTA

    def mcmc(self) -> McmcConfig:
        return McmcConfig(self.iterations, self.burn_in, self.grid, self.seed, self.thinning)

    def priors(self) -> PriorSpec:
        overrides = {k: tuple(v) for k, v in self.prior.items() if k != "leverage"}
        return PriorSpec.default(self.K, self.variant, bool(self.prior.get("leverage", False)), **overrides)

    def out_dir(self) -> Path:
        return Path(self.out or ".")


def _load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    raw = _load_yaml(args.config) if getattr(args, "config", None) else {}
    section = lambda name: raw.get(name) or {}
    cfg = RunConfig()
    data, model, mcmc, fc, sim = (section(s) for s in ("data", "model", "mcmc", "forecast", "simulate"))
    cfg.data = data.get("path", cfg.data)
    cfg.mode = data.get("mode", cfg.mode)
    cfg.column = data.get("column", cfg.column)
    cfg.date_column = data.get("date_column", cfg.date_column)
    if "variant" in model:
        cfg.variant = Variant(model["variant"])
        cfg.K = VARIANT_K[cfg.variant]
    cfg.K = int(model.get("K", cfg.K))
    if "regimes" in model:
        cfg.model = model
    cfg.prior = dict(section("prior"))
    cfg.iterations = int(mcmc.get("iterations", cfg.iterations))
    cfg.burn_in = int(mcmc.get("burn_in", cfg.burn_in))
    cfg.grid = int(mcmc.get("grid", cfg.grid))
    cfg.thinning = int(mcmc.get("thinning", cfg.thinning))
    cfg.seed = raw.get("seed", mcmc.get("seed", cfg.seed))
    cfg.split = fc.get("split", cfg.split)
    cfg.levels = tuple(fc.get("levels", cfg.levels))
    cfg.length = int(sim.get("length", cfg.length))
    cfg.sim_burn_in = int(sim.get("burn_in", cfg.sim_burn_in))
    cfg.delta = float(section("stability").get("delta", cfg.delta))
    cfg.out = section("output").get("dir", cfg.out)

    def flag(name):
        return getattr(args, name, None)

    if flag("model") is not None:
        cfg.variant = Variant(flag("model"))
        cfg.K = VARIANT_K[cfg.variant]
    if flag("k") is not None:
        cfg.K = flag("k")
    for attr, name in [
        ("iterations", "iters"),
        ("burn_in", "burnin"),
        ("grid", "grid"),
        ("seed", "seed"),
        ("data", "data"),
        ("mode", "mode"),
        ("column", "column"),
        ("split", "split"),
        ("out", "out"),
        ("length", "length"),
        ("delta", "delta"),
    ]:
        if flag(name) is not None:
            setattr(cfg, attr, flag(name))
    if flag("levels") is not None:
        cfg.levels = tuple(float(v) for v in flag("levels").split(","))

    if VARIANT_K[cfg.variant] != cfg.K:
        raise ConfigError(f"model {cfg.variant.value} needs K={VARIANT_K[cfg.variant]}, got K={cfg.K}")
    if cfg.seed is not None:
        cfg.seed = int(cfg.seed)
    if any(not 0.0 < a < 1.0 for a in cfg.levels):
        raise ConfigError(f"VaR levels must lie in (0, 1), got {cfg.levels}")
    return cfg


def _require_data(cfg: RunConfig):
    if not cfg.data:
        raise ConfigError("no data file given (--data or data.path)")
    if not Path(cfg.data).exists():
        raise DataError(f"data file {cfg.data} does not exist")
    return io.ingest(cfg.data, cfg.mode, cfg.column, cfg.date_column)


def _split(cfg: RunConfig, n: int) -> int:
    split = cfg.split if cfg.split is not None else n
    if not 0 < split <= n:
        raise ConfigError(f"split must lie in (0, {n}], got {split}")
    return split


def _forecast_split(cfg: RunConfig, n: int) -> int:
    split = _split(cfg, n)
    if split >= n:
        raise ConfigError(f"forecasting needs split < {n} observations, got {split}")
    return split


def _spec_from_fit(path) -> tuple:
    payload = io.read_json(path)
    if "spec" not in payload:
        raise DataError(f"{path} has no 'spec' entry")
    name = payload.get("model", ModelSpec.from_dict(payload["spec"]).variant.value)
    return name, ModelSpec.from_dict(payload["spec"]), payload


def _model_spec(args, cfg: RunConfig) -> tuple:
    if getattr(args, "fit", None):
        name, spec, _ = _spec_from_fit(args.fit[0] if isinstance(args.fit, list) else args.fit)
        return name, spec
    if cfg.model is not None:
        spec = ModelSpec.from_dict(cfg.model)
        return spec.variant.value, spec
    return "msstgarch", benchmark_spec()


def cmd_simulate(args, cfg: RunConfig) -> int:
    _, spec = _model_spec(args, cfg)
    sim = simulate(spec, cfg.length, cfg.seed, cfg.sim_burn_in)
    out = cfg.out_dir()
    header = ["t", "return", "state"] + [f"h_{j + 1}" for j in range(spec.K)]
    cols = [np.arange(1, cfg.length + 1), sim.returns.values, sim.states + 1] + list(sim.variances)
    io.write_csv(out / "simulated.csv", header, cols)
    io.write_json(out / "true_spec.json", {"model": spec.variant.value, "spec": spec.to_dict(), "seed": cfg.seed})
    print(f"wrote {out / 'simulated.csv'}")
    return 0


def cmd_fit(args, cfg: RunConfig) -> int:
    series = _require_data(cfg)
    split = _split(cfg, len(series))
    y = series.values[:split]
    draws = run_gibbs(y, cfg.priors(), cfg.mcmc(), cfg.K)
    summary = posterior_summary(draws)
    d = evaluation.dic(draws, y, stride=max(1, len(draws) // 1000))
    spec = draws.posterior_mean_spec()
    out = cfg.out_dir()
    io.write_draws(out / "draws.csv", draws)
    io.write_csv(
        out / "state_probabilities.csv",
        ["t"] + [f"p_{j + 1}" for j in range(cfg.K)],
        [np.arange(1, split + 1)] + [draws.state_freq[:, j] for j in range(cfg.K)],
    )
    io.write_json(
        out / "fit.json",
        {
            "model": cfg.variant.value,
            "K": cfg.K,
            "n_obs": int(split),
            "mcmc": {
                "iterations": cfg.iterations,
                "burn_in": cfg.burn_in,
                "grid": cfg.grid,
                "thinning": cfg.thinning,
                "seed": cfg.seed,
            },
            "spec": spec.to_dict(),
            "summary": summary,
            "dic": d.to_dict(),
            "sampler_errors": draws.n_errors,
        },
    )
    print(f"{cfg.variant.value}: DIC = {d.dic:.1f}; wrote {out / 'fit.json'}")
    return 0


def cmd_stability(args, cfg: RunConfig) -> int:
    name, spec = _model_spec(args, cfg)
    report = stability_report(spec, cfg.delta)
    payload = {"schema_version": io.SCHEMA_VERSION, "model": name, **report.to_dict()}
    print(json.dumps(payload, indent=2))
    if cfg.out:
        io.write_json(cfg.out_dir() / "stability.json", {"model": name, **report.to_dict()})
    return 0


def _forecasts(args, cfg: RunConfig):
    series = _require_data(cfg)
    split = _forecast_split(cfg, len(series))
    name, spec = _model_spec(args, cfg)
    return series, split, name, spec, evaluation.rolling_forecast(spec, series, split)


def cmd_forecast(args, cfg: RunConfig) -> int:
    series, split, name, spec, fc = _forecasts(args, cfg)
    t = np.arange(split + 1, len(series) + 1)
    header = ["t", "date", "return", "squared_return", "variance"]
    dates = series.dates[split:] if series.dates is not None else [""] * len(fc)
    cols = [t, list(dates), fc.realized, fc.realized**2, fc.variance]
    for level in cfg.levels:
        header.append(f"var_{level:g}")
        cols.append(np.array([d.quantile(1.0 - level) for d in fc.distributions]))
    for j in range(spec.K):
        header.append(f"alpha_{j + 1}")
        cols.append(fc.weights[:, j])
    path = io.write_csv(cfg.out_dir() / "forecast.csv", header, cols)
    print(f"wrote {path}")
    return 0


def cmd_backtest(args, cfg: RunConfig) -> int:
    _, _, name, _, fc = _forecasts(args, cfg)
    report = evaluation.backtest(fc, cfg.levels, name)
    out = cfg.out_dir()
    io.write_json(out / "backtest.json", report.to_dict())
    (out / "backtest.txt").write_text(report.to_text() + "\n")
    print(report.to_text())
    return 0


def cmd_compare(args, cfg: RunConfig) -> int:
    if not args.fit or len(args.fit) < 2:
        raise ConfigError("compare needs at least two --fit files; the first is the reference model")
    series = _require_data(cfg)
    split = _forecast_split(cfg, len(series))
    fits = [_spec_from_fit(p) for p in args.fit]
    names = [f[0] for f in fits]
    if len(set(names)) != len(names):
        names = [f"{n}_{i + 1}" for i, n in enumerate(names)]
    forecasts = [evaluation.rolling_forecast(f[1], series, split) for f in fits]
    sq = forecasts[0].realized ** 2
    dm_rows = []
    for name, fc in zip(names[1:], forecasts[1:]):
        cmp = evaluation.compare_forecasts(forecasts[0], fc, (names[0], name))
        dm_rows.append({"against": name, **cmp.dm.to_dict()})
    measures = {}
    for name, fc in zip(names, forecasts):
        mse, mae = evaluation.mse_mae(fc.variance, sq)
        measures[name] = {"mse": mse, "mae": mae}
    dics = {name: f[2].get("dic", {}).get("dic") for name, f in zip(names, fits)}
    payload = {"reference": names[0], "n_forecasts": len(sq), "dm": dm_rows, "measures": measures, "dic": dics}
    out = cfg.out_dir()
    io.write_json(out / "compare.json", payload)
    lines = [f"DM test: {names[0]} against", f"{'model':<14}{'statistic':>12}{'p-value':>10}"]
    for row in dm_rows:
        lines.append(f"{row['against']:<14}{evaluation._fmt(row['statistic'], 2):>12}{evaluation._fmt(row['p_value']):>10}")
    lines += ["", f"{'model':<14}{'MSE':>10}{'MAE':>10}{'DIC':>12}"]
    for name in names:
        m = measures[name]
        dic_val = dics[name]
        lines.append(
            f"{name:<14}{m['mse']:>10.3f}{m['mae']:>10.3f}{'' if dic_val is None else f'{dic_val:.1f}':>12}"
        )
    text = "\n".join(lines)
    (out / "compare.txt").write_text(text + "\n")
    print(text)
    return 0


def cmd_summary(args, cfg: RunConfig) -> int:
    series = _require_data(cfg)
    stats = evaluation.descriptive_stats(series)
    name = Path(cfg.data).stem
    out = cfg.out_dir()
    io.write_json(out / "summary.json", {"series": name, "n_obs": len(series), "statistics": {
        k: evaluation._json_value(v) for k, v in stats.items()}})
    text = evaluation.descriptive_table({name: stats})
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "stability": cmd_stability,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "compare": cmd_compare,
    "summary": cmd_summary,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--data", help="input CSV with a header row")
    common.add_argument("--mode", choices=("prices", "returns"))
    common.add_argument("--column", help="value column (default: last non-date column)")
    common.add_argument("--model", choices=[v.value for v in Variant])
    common.add_argument("--k", type=int)
    common.add_argument("--iters", type=int)
    common.add_argument("--burnin", type=int)
    common.add_argument("--grid", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--split", type=int, help="number of estimation observations")
    common.add_argument("--levels", help="comma-separated VaR levels")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="msstgarch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="simulate returns and hidden states")
    p.add_argument("--length", type=int)
    p.add_argument("--fit", help="fit.json or true_spec.json to simulate from")
    sub.add_parser("fit", parents=[common], help="Gibbs-sample the posterior")
    p = sub.add_parser("stability", parents=[common], help="second-moment stability report")
    p.add_argument("--fit", help="fit.json holding the model to check")
    p.add_argument("--delta", type=float)
    for name in ("forecast", "backtest"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--fit", help="fit.json with the fitted model")
    p = sub.add_parser("compare", parents=[common], help="DM test and MSE/MAE across fitted models")
    p.add_argument("--fit", action="append", help="fit.json (repeat; first is the reference)")
    sub.add_parser("summary", parents=[common], help="descriptive statistics of a return series")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](args, cfg)
    except MSSTGarchError as exc:
        print(f"msstgarch {args.command}: error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_status
    except (ValueError, TypeError) as exc:
        print(f"msstgarch {args.command}: error [{ConfigError.code}]: {exc}", file=sys.stderr)
        return ConfigError.exit_status
    except OSError as exc:
        print(f"msstgarch {args.command}: error [E_IO]: {exc}", file=sys.stderr)
        return 6


if __name__ == "__main__":
    sys.exit(main())
