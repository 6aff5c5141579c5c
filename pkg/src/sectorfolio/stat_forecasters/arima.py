"""ARIMA(p, d, q) by conditional sum of squares with an AIC grid search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_toeplitz

from .. import kernels
from ..econometrics import (
    DifferencingRecord,
    aic,
    difference,
    integrate_forecast,
    stationarize,
)


MA_ROOT_RADIUS = 0.99


class ArimaError(ValueError):
    pass


@dataclass(frozen=True)
class ArimaModel:
    order: tuple
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    intercept: float
    differencing_record: DifferencingRecord
    sigma2: float
    history: np.ndarray = field(repr=False)
    last_residuals: np.ndarray = field(repr=False)
    aic: float = math.nan
    aic_table: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "order": list(self.order),
            "ar_coeffs": self.ar_coeffs.tolist(),
            "ma_coeffs": self.ma_coeffs.tolist(),
            "intercept": self.intercept,
            "sigma2": self.sigma2,
            "aic": self.aic,
        }


def _yule_walker(z, p):
    if p == 0:
        return np.empty(0)
    zc = z - z.mean()
    n = zc.shape[0]
    acov = np.array([zc[: n - k] @ zc[k:] / n for k in range(p + 1)])
    if acov[0] <= 0:
        return np.zeros(p)
    try:
        phi = solve_toeplitz(acov[:p], acov[1:])
    except np.linalg.LinAlgError:
        return np.zeros(p)
    return phi if np.all(np.isfinite(phi)) else np.zeros(p)


def _fit_ar_ols(z, p, start):
    t = np.arange(start, z.shape[0])
    X = np.column_stack([np.ones(t.shape[0])] + [z[t - i] for i in range(1, p + 1)])
    beta, *_ = np.linalg.lstsq(X, z[t], rcond=None)
    return float(beta[0]), beta[1:]


def _css(params, z, p, q, start):
    # stationary AR part; MA roots kept off the unit circle, where the
    # zero pre-sample errors leave a non-decaying transient
    return kernels.arma_css(np.asarray(params, dtype=np.float64), z, p, q, start, MA_ROOT_RADIUS)


def _fit_order(z, p, q, start):
    """Return (intercept, ar, ma, css) for one (p, q) on the common sample."""
    if q == 0:
        if p == 0:
            c, ar = float(z[start:].mean()), np.empty(0)
        else:
            c, ar = _fit_ar_ols(z, p, start)
        ma = np.empty(0)
    else:
        ar0 = _yule_walker(z, p)
        c0 = float(z.mean() * (1.0 - ar0.sum()))
        x0 = np.concatenate(([c0], ar0, np.zeros(q)))
        f0 = _css(x0, z, p, q, start)
        x, fx, _ = kernels.arma_css_minimize(
            z, p, q, start, x0, MA_ROOT_RADIUS, 1e-7, 1e-10 * max(f0, 1e-300), 600 * x0.size)
        if not fx <= f0:
            x = x0
        c, ar, ma = float(x[0]), x[1:1 + p], x[1 + p:]
    e = kernels.css_residuals(z, ar, ma, c, start)
    return c, np.asarray(ar, dtype=float), np.asarray(ma, dtype=float), float(e @ e), e


def arima_fit(series, max_p: int = 5, max_q: int = 5, max_d: int = 2, max_lag: int | None = None) -> ArimaModel:
    """Pick d by repeated ADF tests, then (p, q) by AIC over the full grid.

    Every candidate is conditioned on the same first ``max_p`` differenced
    values so the AIC values are comparable; pre-sample errors are zero.
    Ties go to the smaller ``p + q``, then the smaller ``p``.
    """
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] < 50:
        raise ArimaError("ARIMA needs at least 50 observations")
    if not np.all(np.isfinite(y)):
        raise ArimaError("series contains non-finite values")
    if np.ptp(y) == 0:
        rec = DifferencingRecord(0, (), ())
        return ArimaModel((0, 0, 0), np.empty(0), np.empty(0), float(y[0]), rec, 0.0,
                          y[-1:].copy(), np.empty(0), -math.inf, {(0, 0): -math.inf})

    _, d = stationarize(y, max_d, max_lag)
    z, record = difference(y, d)
    start = max_p
    n_eff = z.shape[0] - start
    if n_eff <= max_p + max_q + 1:
        raise ArimaError("series too short for the requested order grid")

    grid = sorted(((p, q) for p in range(max_p + 1) for q in range(max_q + 1)),
                  key=lambda pq: (pq[0] + pq[1], pq[0]))
    table = {}
    best = None
    for p, q in grid:
        c, ar, ma, css, e = _fit_order(z, p, q, start)
        if not math.isfinite(css) or css >= 1e300:
            continue
        value = aic(n_eff, p + q + 1, css)
        table[(p, q)] = value
        if best is None or value < best[0]:
            best = (value, p, q, c, ar, ma, css, e)
    if best is None:
        raise ArimaError("no (p, q) candidate produced a finite fit")
    value, p, q, c, ar, ma, css, e = best
    keep = max(p, 1)
    return ArimaModel(
        (p, d, q), ar, ma, c, record, css / n_eff,
        z[-keep:].copy(), e[e.shape[0] - q:].copy() if q else np.empty(0),
        value, table,
    )


def arima_forecast(model: ArimaModel, horizon: int, differenced: bool = False) -> np.ndarray:
    """Multi-step forecast with future innovations set to zero.

    With ``differenced`` the values stay on the differenced scale.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p, _, q = model.order
    z = list(model.history)
    e = list(model.last_residuals)
    out = np.empty(horizon)
    for h in range(horizon):
        val = model.intercept
        for i in range(p):
            val += model.ar_coeffs[i] * z[-1 - i]
        for j in range(q):
            val += model.ma_coeffs[j] * e[-1 - j]
        out[h] = val
        z.append(val)
        e.append(0.0)
    if differenced:
        return out
    return integrate_forecast(out, model.differencing_record)
