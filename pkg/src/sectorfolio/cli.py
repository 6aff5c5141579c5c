"""Command-line front end: ingest, evaluate, frontier, backtest, report.

Every command reads one JSON run configuration (``--config``); ``--seed``
and ``--out`` override the matching keys. Artifacts are written with sorted
keys and ``repr`` floats, so identical inputs give identical bytes.

Exit codes: 0 success, 1 internal error, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import market_data as md
from .portfolio import (
    PortfolioError, PortfolioWeights, asset_stats, backtest, correlation_matrix,
    covariance_matrix, equal_weight, realized_stats, sample_frontier,
)
from .walk_forward import (
    SCHEMES, WalkForwardConfig, WalkForwardError, evaluate, get_forecaster, model_names,
)

logger = logging.getLogger("sectorfolio")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2

# ARIMA and MARS were run on half-year windows; everything else on a year
SHORT_WINDOW_MODELS = {"arima": 122, "mars": 122}
DEFAULT_TRAIN_SIZE = 245


class ConfigError(ValueError):
    """Invalid configuration or missing inputs: exit code 2."""


# ------------------------------------------------------------------- config

def _strict(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return cls(**data)


@dataclass
class SourceConfig:
    path: str | None = None
    endpoint: str | None = None
    simulate: dict | None = None

    def check(self, name):
        given = [k for k in ("path", "endpoint", "simulate") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ConfigError(f"symbol {name!r} needs exactly one of path, endpoint, simulate")


@dataclass
class WalkForwardSettings:
    train_size: int | None = None   # None: 122 for ARIMA/MARS, 245 otherwise
    test_size: int = 14
    step: int | None = None
    schemes: list = field(default_factory=lambda: ["expanding"])
    task: str | None = None
    n_jobs: int = 1

    def for_model(self, model, scheme):
        train = self.train_size if self.train_size is not None else SHORT_WINDOW_MODELS.get(model, DEFAULT_TRAIN_SIZE)
        return WalkForwardConfig(train, self.test_size, self.step, scheme)


@dataclass
class PortfolioSettings:
    capital: float = 100000.0
    risk_free: float = 0.01
    n_samples: int = 10000
    annualization: str = "arithmetic"
    train_start: str | None = None
    train_end: str | None = None
    test_start: str | None = None
    test_end: str | None = None


@dataclass
class RunConfig:
    symbols: dict = field(default_factory=dict)
    market_index: dict | None = None
    start: str | None = None
    end: str | None = None
    models: list = field(default_factory=lambda: ["persistence"])
    model_params: dict = field(default_factory=dict)
    walk_forward: WalkForwardSettings = field(default_factory=WalkForwardSettings)
    portfolio: PortfolioSettings = field(default_factory=PortfolioSettings)
    seed: int = 0
    out: str = "out"
    cache_dir: str | None = None

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) in configuration: {', '.join(unknown)}")
        data = dict(data)
        data["walk_forward"] = _strict(WalkForwardSettings, data.get("walk_forward"), "walk_forward")
        data["portfolio"] = _strict(PortfolioSettings, data.get("portfolio"), "portfolio")
        syms = data.get("symbols", {})
        if not isinstance(syms, dict):
            raise ConfigError("symbols must map a symbol to its source")
        data["symbols"] = {str(k): _strict(SourceConfig, v, f"symbols.{k}") for k, v in syms.items()}
        if data.get("market_index") is not None:
            mi = dict(data["market_index"])
            name = mi.pop("symbol", None)
            if not name:
                raise ConfigError("market_index needs a symbol")
            src = _strict(SourceConfig, mi, "market_index")
            data["market_index"] = {str(name): src}
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        for name, src in self.all_sources().items():
            src.check(name)
        wf = self.walk_forward
        bad = [s for s in wf.schemes if s not in SCHEMES]
        if bad or not wf.schemes:
            raise ConfigError(f"walk_forward.schemes must be drawn from {SCHEMES}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        p = self.portfolio
        if p.capital <= 0 or p.n_samples < 1:
            raise ConfigError("portfolio.capital and portfolio.n_samples must be positive")
        if p.annualization not in ("arithmetic", "compound"):
            raise ConfigError("portfolio.annualization must be arithmetic or compound")
        for key in ("start", "end"):
            _date(getattr(self, key), key)
        for key in ("train_start", "train_end", "test_start", "test_end"):
            _date(getattr(p, key), f"portfolio.{key}")

    def all_sources(self):
        out = dict(self.symbols)
        if self.market_index:
            out.update(self.market_index)
        return out

    @property
    def index_symbol(self):
        return next(iter(self.market_index)) if self.market_index else None


def _date(value, key):
    if value is None:
        return None
    try:
        return np.datetime64(value, "D")
    except ValueError:
        raise ConfigError(f"{key}: {value!r} is not a YYYY-MM-DD date") from None


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc


# ------------------------------------------------------------------ helpers

def _dump_json(obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")


def _clean(obj):
    # JSON has no NaN; undefined statistics are written as null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _data_path(cfg, symbol):
    return Path(cfg.out) / f"{symbol}.csv"


def _load_ingested(cfg, symbol):
    path = _data_path(cfg, symbol)
    if not path.exists():
        raise ConfigError(f"no ingested data for {symbol} at {path}; run 'ingest' first")
    return md.load_ohlcv(path, symbol)


def _acquire(cfg, symbol, src: SourceConfig):
    if src.path is not None:
        try:
            series = md.load_ohlcv(Path(src.path), symbol)
        except FileNotFoundError:
            raise ConfigError(f"{symbol}: no such file {src.path}") from None
    elif src.endpoint is not None:
        if cfg.start is None or cfg.end is None:
            raise ConfigError("fetching needs start and end dates")
        cache = cfg.cache_dir or str(Path(cfg.out) / "cache")
        series = md.fetch_remote_ohlcv(src.endpoint, symbol, cfg.start, cfg.end, cache)
    else:
        params = dict(src.simulate)
        params.setdefault("seed", cfg.seed)
        if cfg.start is not None:
            params.setdefault("start", cfg.start)
        if cfg.end is not None:
            params.setdefault("end", cfg.end)
        try:
            series = md.simulate_ohlcv(symbol, **params)
        except TypeError as exc:
            raise ConfigError(f"symbols.{symbol}.simulate: {exc}") from exc
    series = series.slice_dates(cfg.start, cfg.end)
    if len(series) == 0:
        raise ConfigError(f"{symbol}: no rows between {cfg.start} and {cfg.end}")
    return md.align_weekday_calendar(series)


def _common_dates(series_list):
    common = series_list[0].dates
    for s in series_list[1:]:
        common = np.intersect1d(common, s.dates)
    return common


def _restrict(series, dates):
    idx = np.flatnonzero(np.isin(series.dates, dates))
    return series._take(idx)


def _feature_frame(cfg, symbol, task):
    series = _load_ingested(cfg, symbol)
    index = cfg.index_symbol
    if index is None:
        if task == "classification":
            raise ConfigError("classification features need a market_index in the configuration")
        return md.close_frame(series)
    market = _load_ingested(cfg, index)
    common = _common_dates([series, market])
    series, market = _restrict(series, common), _restrict(market, common)
    if task == "classification":
        return md.derive_classification_features(series, market)
    return md.derive_regression_features(series, market)


# ----------------------------------------------------------------- commands

def cmd_ingest(cfg: RunConfig, args) -> int:
    if not cfg.symbols:
        raise ConfigError("configuration lists no symbols")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for symbol, src in sorted(cfg.all_sources().items()):
        series = _acquire(cfg, symbol, src)
        md.write_csv(series, _data_path(cfg, symbol))
        print(f"{symbol}: {len(series)} rows -> {_data_path(cfg, symbol)}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    models = [args.model] if args.model else list(cfg.models)
    valid = model_names()
    unknown = [m for m in models if m not in valid]
    if unknown:
        raise ConfigError(f"unknown model(s) {', '.join(unknown)}; valid names: {', '.join(valid)}")
    schemes = list(SCHEMES) if args.scheme == "both" else [args.scheme] if args.scheme else list(cfg.walk_forward.schemes)
    symbols = [args.symbol] if args.symbol else sorted(cfg.symbols)
    if not symbols:
        raise ConfigError("configuration lists no symbols")
    wf = cfg.walk_forward
    frames = {}
    for symbol in symbols:
        for model in models:
            params = dict(cfg.model_params.get(model, {}))
            try:
                spec = get_forecaster(model, task=args.task or wf.task, seed=cfg.seed, **params)
            except WalkForwardError as exc:
                raise ConfigError(str(exc)) from exc
            key = (symbol, spec.task)
            if key not in frames:
                frames[key] = _feature_frame(cfg, symbol, spec.task)
            for scheme in schemes:
                report = evaluate(spec, frames[key], wf.for_model(model, scheme), n_jobs=wf.n_jobs)
                stem = Path(cfg.out) / f"report_{symbol}_{model}_{scheme}"
                payload = report.to_dict()
                payload["symbol"] = symbol
                payload["seed"] = cfg.seed
                _dump_json(payload, stem.with_suffix(".json"))
                stem.with_suffix(".csv").write_text(report.to_csv())
                value = "n/a" if report.pooled is None else f"{report.pooled:.4f}"
                print(f"{symbol} {model} {scheme}: {report.metric_name} = {value}"
                      f" ({len(report.folds)} folds, {report.n_failed} failed)")
    return EXIT_OK


def _training_inputs(cfg):
    symbols = sorted(cfg.symbols)
    if not symbols:
        raise ConfigError("configuration lists no symbols")
    p = cfg.portfolio
    series = [_load_ingested(cfg, s).slice_dates(p.train_start, p.train_end) for s in symbols]
    common = _common_dates(series)
    if common.shape[0] < 3:
        raise ConfigError(f"only {common.shape[0]} common training days; need at least 3")
    closes = {s.symbol: _restrict(s, common).close for s in series}
    stats = [asset_stats(closes[s], s, p.annualization) for s in symbols]
    returns = {s: md.to_returns(closes[s]) for s in symbols}
    return symbols, stats, returns, common


def cmd_frontier(cfg: RunConfig, args) -> int:
    p = cfg.portfolio
    symbols, stats, returns, common = _training_inputs(cfg)
    cov = covariance_matrix(returns)
    corr, undefined = correlation_matrix(returns)
    result = sample_frontier(stats, cov, p.n_samples, p.risk_free, cfg.seed)
    summary = result.summary(equal_weight(symbols), stats, cov)
    summary["training_window"] = {"start": str(common[0]), "end": str(common[-1]), "days": int(common.shape[0])}
    summary["asset_stats"] = [s.to_dict() for s in stats]
    summary["covariance"] = cov
    summary["correlation"] = corr
    summary["correlation_undefined"] = [list(pair) for pair in undefined]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "frontier.csv").write_text(result.to_csv())
    _dump_json(summary, out / "frontier.json")
    for label in ("min_variance", "optimal"):
        row = summary[label]
        print(f"{label}: return {row['annual_return']:.4f} risk {row['annual_risk']:.4f} sharpe {row['sharpe']:.4f}")
    return EXIT_OK


def _weights_from(cfg, source, weights_file):
    out = Path(cfg.out)
    if source in ("min_var", "optimal"):
        path = out / "frontier.json"
        if not path.exists():
            raise ConfigError(f"{path} not found; run 'frontier' first")
        summary = json.loads(path.read_text())
        key = "min_variance" if source == "min_var" else "optimal"
        return PortfolioWeights(summary[key]["weights"]), None
    if source == "equal":
        return equal_weight(sorted(cfg.symbols)), None
    if weights_file is None:
        raise ConfigError("--weights file needs --weights-file")
    try:
        data = json.loads(Path(weights_file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read weights file {weights_file}: {exc}") from exc
    if not isinstance(data, dict) or len(set(data) & {"weights", "amounts"}) != 1 or set(data) - {"weights", "amounts"}:
        raise ConfigError("weights file must hold exactly one of 'weights' or 'amounts'")
    if "amounts" in data:
        return None, data["amounts"]
    return PortfolioWeights(data["weights"]), None


def cmd_backtest(cfg: RunConfig, args) -> int:
    p = cfg.portfolio
    weights, amounts = _weights_from(cfg, args.weights, args.weights_file)
    symbols = sorted(amounts) if amounts is not None else sorted(weights.weights)
    series = [_load_ingested(cfg, s).slice_dates(p.test_start, p.test_end) for s in symbols]
    empty = [s.symbol for s in series if len(s) == 0]
    if empty:
        raise ConfigError(f"no prices between {p.test_start} and {p.test_end} for {', '.join(empty)}")
    common = _common_dates(series)
    if common.shape[0] < 2:
        raise ConfigError("backtest window needs at least 2 common trading days")
    closes = {s.symbol: _restrict(s, common).close for s in series}
    ledger = backtest(weights, {s: c[0] for s, c in closes.items()}, {s: c[-1] for s, c in closes.items()},
                      p.capital, daily_closes=closes, dates=common, amounts=amounts)
    payload = ledger.to_dict()
    payload["weights_source"] = args.weights
    payload["window"] = {"start": str(common[0]), "end": str(common[-1]), "days": int(common.shape[0])}
    payload["realized"] = realized_stats(ledger.daily_values, p.risk_free)
    _dump_json(payload, Path(cfg.out) / f"backtest_{args.weights}.json")
    print(f"backtest {args.weights}: capital {ledger.capital:.2f} final {ledger.final_value:.2f}"
          f" return {ledger.total_return_pct:.2f}%")
    return EXIT_OK


REPORT_FIELDS = ("symbol", "model", "scheme", "task", "metric", "pooled", "mean_per_fold", "n_folds", "n_failed")


def cmd_report(cfg: RunConfig, args) -> int:
    out = Path(cfg.out)
    paths = sorted(out.glob("report_*.json"))
    if not paths:
        raise ConfigError(f"no report_*.json files in {out}")
    rows = []
    for path in paths:
        rep = json.loads(path.read_text())
        m = rep["metrics"]
        rows.append({"symbol": rep.get("symbol", ""), "model": rep["model"], "scheme": rep["scheme"],
                     "task": rep["task"], "metric": m["name"],
                     "pooled": "" if m["pooled"] is None else repr(m["pooled"]),
                     "mean_per_fold": "" if m["mean_per_fold"] is None else repr(m["mean_per_fold"]),
                     "n_folds": m["n_folds"], "n_failed": m["n_failed"]})
    rows.sort(key=lambda r: (r["symbol"], r["model"], r["scheme"]))
    buf = io.StringIO()
    w = csv.DictWriter(buf, REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    (out / "summary.csv").write_text(buf.getvalue())
    print(f"summary of {len(rows)} runs -> {out / 'summary.csv'}")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "evaluate": cmd_evaluate, "frontier": cmd_frontier,
            "backtest": cmd_backtest, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="sectorfolio", parents=[common],
                                     description="Walk-forward forecasting and sampled mean-variance portfolios.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="load, align and cache price data")
    ev = sub.add_parser("evaluate", parents=[common], help="walk-forward evaluation of forecasters")
    ev.add_argument("--model", help="one model name (default: the config's models list)")
    ev.add_argument("--scheme", choices=list(SCHEMES) + ["both"])
    ev.add_argument("--symbol")
    ev.add_argument("--task", choices=["regression", "classification"])
    sub.add_parser("frontier", parents=[common], help="sample the efficient frontier")
    bt = sub.add_parser("backtest", parents=[common], help="buy-and-hold a portfolio")
    bt.add_argument("--weights", choices=["min_var", "optimal", "equal", "file"], default="optimal")
    bt.add_argument("--weights-file")
    sub.add_parser("report", parents=[common], help="merge evaluation reports into summary.csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(getattr(args, "config", None))
        if hasattr(args, "seed"):
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg.seed = args.seed
        if hasattr(args, "out"):
            cfg.out = args.out
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, md.MarketDataError, WalkForwardError, PortfolioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort handler for the exit code contract
        logger.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
