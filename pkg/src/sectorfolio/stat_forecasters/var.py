"""Vector autoregression on a jointly differenced set of price series."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..econometrics import (
    SingularRegressionError,
    StationarityError,
    difference,
    durbin_watson,
    integrate_forecast,
    stationarize,
)
from ..market_data import OhlcvSeries

logger = logging.getLogger(__name__)

PRICE_VARIABLES = ("open", "high", "low", "close")


class VarError(ValueError):
    pass


@dataclass(frozen=True)
class VarModel:
    variables: tuple
    order: int
    coefficient_matrices: np.ndarray  # (p, K, K); [i, r, c] = lag i+1 of c in equation r
    intercept: np.ndarray
    differencing_orders: tuple
    differencing_records: tuple = field(repr=False)
    durbin_watson: dict = field(default_factory=dict)
    sigma: np.ndarray = field(default=None, repr=False)
    history: np.ndarray = field(default=None, repr=False)
    aic: float = math.nan
    aic_by_lag: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "variables": list(self.variables),
            "order": self.order,
            "coefficient_matrices": self.coefficient_matrices.tolist(),
            "intercept": self.intercept.tolist(),
            "differencing_orders": list(self.differencing_orders),
            "durbin_watson": dict(self.durbin_watson),
            "aic": self.aic,
        }


def _as_columns(frame):
    if isinstance(frame, OhlcvSeries):
        return {name: getattr(frame, name) for name in PRICE_VARIABLES}
    if isinstance(frame, Mapping):
        return {str(k): np.asarray(v, dtype=np.float64) for k, v in frame.items()}
    raise TypeError("var_fit expects an OhlcvSeries or a mapping of name -> series")


def _design(Z, p, first):
    """Rows t = first..T-1: [1, z[t-1], ..., z[t-p]] and targets z[t]."""
    t = np.arange(first, Z.shape[0])
    cols = [np.ones((t.shape[0], 1))]
    for i in range(1, p + 1):
        cols.append(Z[t - i])
    return np.hstack(cols), Z[t]


def _multi_ols(X, Y):
    n, k = X.shape
    if n <= k:
        raise SingularRegressionError(f"{n} rows for {k} coefficients per equation")
    coef, _, rank, sv = np.linalg.lstsq(X, Y, rcond=None)
    if rank < k or sv[-1] <= sv[0] * 1e-12:
        raise SingularRegressionError("VAR design matrix is rank deficient")
    return coef, Y - X @ coef


def var_aic(resid: np.ndarray, n_coefficients: int) -> float:
    """``T ln det(Sigma) + 2 k`` with Sigma the ML residual covariance."""
    T = resid.shape[0]
    sigma = resid.T @ resid / T
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        return -math.inf
    return T * logdet + 2 * n_coefficients


def var_fit(frame, p_max: int = 10, max_d: int = 2) -> VarModel:
    """Fit a VAR(p) with p chosen by multivariate AIC on a common sample.

    Every series is differenced to the largest order any one of them needs.
    Lags 1..p_max are compared on the rows after the first ``p_max``; the
    winner (ties to the smaller p) is refit on all usable rows.
    """
    cols = _as_columns(frame)
    names = tuple(cols)
    if not names:
        raise VarError("no series given")
    if p_max < 1:
        raise VarError("p_max must be >= 1")
    lengths = {c.shape[0] for c in cols.values()}
    if len(lengths) != 1:
        raise VarError("all series must have the same length")
    n = lengths.pop()
    if n < 5 * p_max:
        raise VarError(f"need at least {5 * p_max} observations, have {n}")
    for k, v in cols.items():
        if not np.all(np.isfinite(v)):
            raise VarError(f"series {k!r} has non-finite values")

    d = 0
    for k in names:
        try:
            _, dk = stationarize(cols[k], max_d)
        except StationarityError as exc:
            raise VarError(f"series {k!r} is not stationary after {max_d} differences") from exc
        d = max(d, dk)
    diffed, records = [], []
    for k in names:
        z, rec = difference(cols[k], d)
        diffed.append(z)
        records.append(rec)
    Z = np.column_stack(diffed)
    K = len(names)

    table = {}
    best_p, best_aic = None, math.inf
    for p in range(1, p_max + 1):
        X, Y = _design(Z, p, p_max)
        try:
            _, resid = _multi_ols(X, Y)
        except SingularRegressionError:
            logger.warning("var_fit: lag %d design is singular, skipped", p)
            continue
        value = var_aic(resid, K * (K * p + 1))
        table[p] = value
        if best_p is None or value < best_aic:
            best_p, best_aic = p, value
    if best_p is None:
        raise VarError("every lag order gave a singular design")

    X, Y = _design(Z, best_p, best_p)
    try:
        coef, resid = _multi_ols(X, Y)
    except SingularRegressionError as exc:
        raise VarError(str(exc)) from exc
    intercept = coef[0].copy()
    mats = np.stack([coef[1 + i * K:1 + (i + 1) * K].T for i in range(best_p)])
    dw = {}
    for j, name in enumerate(names):
        try:
            dw[name] = durbin_watson(resid[:, j])
        except ValueError:
            dw[name] = math.nan
    return VarModel(
        names, best_p, mats, intercept, (d,) * K, tuple(records), dw,
        resid.T @ resid / resid.shape[0], Z[-best_p:].copy(), best_aic, table,
    )


def var_forecast(model: VarModel, horizon: int, differenced: bool = False) -> np.ndarray:
    """``horizon`` x K forecasts, row h being the (h+1)-step-ahead values."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p = model.order
    hist = [row for row in model.history]
    out = np.empty((horizon, len(model.variables)))
    for h in range(horizon):
        val = model.intercept.copy()
        for i in range(p):
            val = val + model.coefficient_matrices[i] @ hist[-1 - i]
        out[h] = val
        hist.append(val)
    if differenced:
        return out
    return np.column_stack([integrate_forecast(out[:, j], rec)
                            for j, rec in enumerate(model.differencing_records)])
