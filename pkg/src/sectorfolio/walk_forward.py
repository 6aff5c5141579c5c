"""Walk-forward validation with expanding or sliding training windows."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .market_data import FeatureFrame, weekday_codes
from .ml_forecasters import (
    cart_fit, cart_predict, forest_fit, forest_predict, gbm_fit, gbm_predict,
    knn_fit, knn_predict, logit_fit, logit_predict,
)
from .stat_forecasters import (
    ArimaError, arima_fit, arima_forecast, mars_fit, mars_predict, ols_fit,
    ols_predict, var_fit, var_forecast,
)

logger = logging.getLogger(__name__)

SCHEMES = ("expanding", "sliding")
WEEKDAY_NAMES = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday")


class WalkForwardError(ValueError):
    pass


@dataclass(frozen=True)
class WalkForwardConfig:
    train_size: int = 245
    test_size: int = 14
    step: int | None = None
    scheme: str = "expanding"

    def __post_init__(self):
        if self.step is None:
            object.__setattr__(self, "step", self.test_size)
        if self.train_size < 1 or self.test_size < 1 or self.step < 1:
            raise WalkForwardError("train_size, test_size and step must all be >= 1")
        if self.scheme not in SCHEMES:
            raise WalkForwardError(f"scheme must be one of {SCHEMES}")


def make_splits(n: int, config: WalkForwardConfig):
    """List of ``(train range, test range)``.

    Fold f tests rows ``[train_size + f*step, +test_size)`` clipped to ``n``;
    the final fold may be shorter.
    """
    if n <= config.train_size:
        raise WalkForwardError(f"{n} rows leave nothing to test after {config.train_size} training rows")
    out = []
    start = config.train_size
    while start < n:
        lo = 0 if config.scheme == "expanding" else start - config.train_size
        out.append((range(lo, start), range(start, min(start + config.test_size, n))))
        start += config.step
    return out


# ------------------------------------------------------------------ metrics

def rmse_over_mean(predictions, actuals) -> float:
    """100 * RMSE / mean(actuals)."""
    p = np.asarray(predictions, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if p.shape != a.shape or p.size == 0:
        raise ValueError("predictions and actuals must have equal nonzero length")
    mean = float(a.mean())
    if mean == 0:
        raise ValueError("mean of actuals is zero")
    return 100.0 * math.sqrt(float(np.mean((p - a) ** 2))) / mean


def accuracy(predicted, actual) -> float:
    p = np.asarray(predicted)
    a = np.asarray(actual)
    if p.shape != a.shape:
        raise ValueError("label arrays must have equal length")
    if p.size == 0:
        raise ValueError("no labels to score")
    return 100.0 * float(np.sum(p == a)) / p.size


def _metric(task):
    return rmse_over_mean if task == "regression" else accuracy


# ---------------------------------------------------------------- forecasters

@dataclass(frozen=True)
class ForecasterSpec:
    """A named model: ``fit_predict(train, test, seed) -> predictions``.

    ``fit_predict`` may only look at ``test`` columns that are legitimately
    known in advance; forecasters that need none ignore it apart from its
    length and dates.
    """

    name: str
    task: str
    fit_predict: Callable
    seed: int = 0
    params: dict = field(default_factory=dict)

    def run(self, train: FeatureFrame, test: FeatureFrame) -> np.ndarray:
        return np.asarray(self.fit_predict(train, test, self.seed, **self.params), dtype=np.float64)


def _persistence(train, test, seed):
    return np.full(len(test), float(train.target[-1]))


def _ols(train, test, seed, vif_threshold=10.0, stepwise=True):
    return ols_predict(ols_fit(train, vif_threshold, stepwise), test)


def _forecast_column(values, horizon):
    try:
        return arima_forecast(arima_fit(values), horizon)
    except (ArimaError, ValueError) as exc:
        logger.info("chained OLS: ARIMA failed on a predictor (%s); holding its last value", exc)
        return np.full(horizon, float(values[-1]))


def _ols_chained(train, test, seed, vif_threshold=10.0, stepwise=True):
    # predictors for the test days are themselves ARIMA forecasts, apart
    # from the calendar columns which are known in advance
    model = ols_fit(train, vif_threshold, stepwise)
    h = len(test)
    cols = {}
    for name in test.names:
        if name in test.categorical:
            cols[name] = test.columns[name]
        elif name in model.selected_columns:
            cols[name] = _forecast_column(train.columns[name], h)
        else:
            cols[name] = np.zeros(h)
    future = FeatureFrame(test.dates, cols, test.target_name, np.zeros(h), test.categorical)
    return ols_predict(model, future)


def _arima(train, test, seed, max_p=5, max_q=5):
    return arima_forecast(arima_fit(train.target, max_p=max_p, max_q=max_q), len(test))


def _mars(train, test, seed, max_terms=300, max_degree=3):
    return mars_predict(mars_fit(train, max_terms, max_degree), test)


def _var(train, test, seed, p_max=10):
    need = ("open", "high", "low")
    missing = [c for c in need if c not in train.columns]
    if missing:
        raise WalkForwardError(f"VAR needs columns {missing}")
    data = {c: train.columns[c] for c in need}
    data[train.target_name] = train.target
    p_max = max(1, min(p_max, len(train) // 5))
    model = var_fit(data, p_max=p_max)
    return var_forecast(model, len(test))[:, -1]


def _knn(train, test, seed, task="regression", k=5):
    return knn_predict(knn_fit(train, k, task), test)


def _cart(train, test, seed, task="regression", max_depth=None, min_impurity_decrease=0.0):
    return cart_predict(cart_fit(train, max_depth, min_impurity_decrease, task), test)


def _forest(train, test, seed, task="regression", n_trees=100, feature_fraction=None, n_jobs=1):
    return forest_predict(forest_fit(train, n_trees, feature_fraction, seed, task, n_jobs=n_jobs), test)


def _gbm(train, test, seed, task="regression", n_stages=100, learning_rate=0.1, max_depth=3):
    return gbm_predict(gbm_fit(train, n_stages, learning_rate, max_depth, seed, task), test)


def _logit(train, test, seed, max_iter=100, tol=1e-8):
    return logit_predict(logit_fit(train, max_iter, tol), test)


# name -> (fit_predict, default task, tasks it supports)
REGISTRY = {
    "persistence": (_persistence, "regression", ("regression",)),
    "ols": (_ols, "regression", ("regression",)),
    "ols_chained": (_ols_chained, "regression", ("regression",)),
    "arima": (_arima, "regression", ("regression",)),
    "mars": (_mars, "regression", ("regression",)),
    "var": (_var, "regression", ("regression",)),
    "knn": (_knn, "regression", ("regression", "classification")),
    "cart": (_cart, "regression", ("regression", "classification")),
    "forest": (_forest, "regression", ("regression", "classification")),
    "gbm": (_gbm, "regression", ("regression", "classification")),
    "logit": (_logit, "classification", ("classification",)),
}


def register(name: str, fit_predict: Callable, task: str = "regression", tasks=None):
    """Add a model to the registry (used for test oracles and extensions)."""
    REGISTRY[name] = (fit_predict, task, tuple(tasks or (task,)))


def model_names():
    return sorted(REGISTRY)


def get_forecaster(name: str, task: str | None = None, seed: int = 0, **params) -> ForecasterSpec:
    try:
        fn, default_task, tasks = REGISTRY[name]
    except KeyError:
        raise WalkForwardError(f"unknown model {name!r}; valid names: {', '.join(model_names())}") from None
    task = task or default_task
    if task not in tasks:
        raise WalkForwardError(f"model {name!r} does not support task {task!r}")
    if "task" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
        params = {"task": task, **params}
    return ForecasterSpec(name, task, fn, seed, params)


# ----------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class FoldResult:
    index: int
    train_range: tuple
    dates: np.ndarray
    predictions: np.ndarray
    actuals: np.ndarray
    metric: float | None = None
    error: str | None = None

    @property
    def failed(self):
        return self.error is not None

    def to_dict(self):
        return {
            "index": self.index,
            "train_range": list(self.train_range),
            "dates": [str(d) for d in self.dates],
            "pred": None if self.failed else self.predictions.tolist(),
            "actual": self.actuals.tolist(),
            "metric": self.metric,
            "error": self.error,
        }


@dataclass(frozen=True)
class EvaluationReport:
    model: str
    scheme: str
    task: str
    config: WalkForwardConfig
    folds: tuple
    metric_name: str
    pooled: float | None
    mean_per_fold: float | None
    n_failed: int
    daywise: dict = field(default_factory=dict)
    daywise_missing: tuple = ()

    def pooled_arrays(self):
        good = [f for f in self.folds if not f.failed]
        if not good:
            return np.empty(0), np.empty(0), np.empty(0, dtype="datetime64[D]")
        return (np.concatenate([f.predictions for f in good]),
                np.concatenate([f.actuals for f in good]),
                np.concatenate([f.dates for f in good]))

    def to_dict(self):
        return {
            "model": self.model,
            "scheme": self.scheme,
            "task": self.task,
            "config": asdict(self.config),
            "folds": [f.to_dict() for f in self.folds],
            "metrics": {
                "name": self.metric_name,
                "pooled": self.pooled,
                "mean_per_fold": self.mean_per_fold,
                "n_folds": len(self.folds),
                "n_failed": self.n_failed,
                "fold_lengths": [int(f.actuals.shape[0]) for f in self.folds],
            },
            "daywise": {WEEKDAY_NAMES[k]: v for k, v in sorted(self.daywise.items())},
            "daywise_missing": [WEEKDAY_NAMES[k] for k in self.daywise_missing],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "date", "weekday", "prediction", "actual"])
        for f in self.folds:
            if f.failed:
                continue
            for d, p, a in zip(f.dates, f.predictions, f.actuals):
                w.writerow([f.index, str(d), WEEKDAY_NAMES[int(weekday_codes(d))], repr(float(p)), repr(float(a))])
        return buf.getvalue()


def _run_fold(spec, frame, index, train_idx, test_idx):
    train = frame.rows(train_idx)
    test = frame.rows(test_idx)
    actual = np.asarray(test.target, dtype=np.float64)
    try:
        pred = spec.run(train, test)
        if pred.shape != actual.shape:
            raise WalkForwardError(f"model returned {pred.shape[0]} predictions for {actual.shape[0]} rows")
        if not np.all(np.isfinite(pred)):
            raise WalkForwardError("model returned non-finite predictions")
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, KeyError) as exc:
        logger.warning("%s fold %d failed: %s", spec.name, index, exc)
        return FoldResult(index, (train_idx.start, train_idx.stop), test.dates, np.empty(0), actual,
                          None, f"{type(exc).__name__}: {exc}")
    try:
        metric = _metric(spec.task)(pred, actual)
    except ValueError:
        metric = None
    return FoldResult(index, (train_idx.start, train_idx.stop), test.dates, pred, actual, metric)


def daywise_breakdown(report: EvaluationReport):
    """Per-weekday metric over all pooled predictions.

    Returns ``(values, missing)``: ``values`` maps weekday code 0-4 to the
    metric of that weekday's predictions; weekdays with no predictions are
    listed in ``missing`` instead.
    """
    pred, act, dates = report.pooled_arrays()
    codes = weekday_codes(dates) if dates.size else np.empty(0, dtype=int)
    metric = _metric(report.task)
    values, missing = {}, []
    for day in range(5):
        sel = codes == day
        if not np.any(sel):
            missing.append(day)
            continue
        try:
            values[day] = metric(pred[sel], act[sel])
        except ValueError:
            missing.append(day)
    return values, tuple(missing)


def evaluate(spec: ForecasterSpec, frame: FeatureFrame, config: WalkForwardConfig | None = None,
             n_jobs: int = 1) -> EvaluationReport:
    """Fit on each training window, predict its test block, pool the results.

    Failed folds are kept in the report but left out of every metric. The
    report is the same whatever ``n_jobs`` is.
    """
    config = config or WalkForwardConfig()
    splits = make_splits(len(frame), config)
    if n_jobs == 1:
        folds = [_run_fold(spec, frame, i, tr, te) for i, (tr, te) in enumerate(splits)]
    else:
        with ThreadPoolExecutor(max_workers=None if n_jobs < 1 else n_jobs) as pool:
            futures = [pool.submit(_run_fold, spec, frame, i, tr, te) for i, (tr, te) in enumerate(splits)]
            folds = [f.result() for f in futures]
    folds.sort(key=lambda f: f.index)
    good = [f for f in folds if not f.failed]
    metric = _metric(spec.task)
    pooled = mean_fold = None
    if good:
        pred = np.concatenate([f.predictions for f in good])
        act = np.concatenate([f.actuals for f in good])
        pooled = metric(pred, act)
        per = [f.metric for f in good if f.metric is not None]
        mean_fold = float(np.mean(per)) if per else None
    name = "rmse_over_mean_pct" if spec.task == "regression" else "accuracy_pct"
    report = EvaluationReport(spec.name, config.scheme, spec.task, config, tuple(folds), name,
                              pooled, mean_fold, len(folds) - len(good))
    values, missing = daywise_breakdown(report)
    return EvaluationReport(spec.name, config.scheme, spec.task, config, tuple(folds), name,
                            pooled, mean_fold, len(folds) - len(good), values, missing)
