"""Unit-root, causality and residual diagnostics plus differencing helpers."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

# constant-only Dickey-Fuller regression, large-sample values
ADF_CRITICAL_VALUES = {"1%": -3.435, "5%": -2.864, "10%": -2.568}
# residual-based test for two variables with a constant (asymptotic)
ENGLE_GRANGER_CRITICAL_VALUES = {"1%": -3.90, "5%": -3.34, "10%": -3.04}


class SingularRegressionError(ValueError):
    """The least-squares design (or its residual variance) is degenerate."""


class StationarityError(ValueError):
    def __init__(self, message, statistic=None):
        self.statistic = statistic
        super().__init__(message)


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    lags_used: int
    nobs: int
    critical_values: Mapping[str, float] = field(default_factory=lambda: dict(ADF_CRITICAL_VALUES))

    @property
    def is_stationary_5pct(self) -> bool:
        return self.statistic < self.critical_values["5%"]

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "lags_used": self.lags_used,
            "nobs": self.nobs,
            "critical_values": dict(self.critical_values),
            "is_stationary_5pct": self.is_stationary_5pct,
        }


@dataclass(frozen=True)
class GrangerMatrix:
    """Entry ``(i, j)`` is the p-value that ``variables[j]`` Granger-causes ``variables[i]``."""

    variables: tuple
    p_values: np.ndarray
    max_lag: int
    alpha: float = 0.05
    flagged: tuple = ()

    def causes(self, y: str, x: str) -> bool:
        i, j = self.variables.index(y), self.variables.index(x)
        return bool(self.p_values[i, j] < self.alpha)

    def to_dict(self):
        return {
            "variables": list(self.variables),
            "p_values": self.p_values.tolist(),
            "max_lag": self.max_lag,
            "alpha": self.alpha,
            "flagged": [list(p) for p in self.flagged],
        }


@dataclass(frozen=True)
class DifferencingRecord:
    """What is needed to undo ``difference(x, order)``.

    ``head_values[k]`` is the first element of the k-times differenced
    series and ``seed_values[k]`` its last element. Heads invert the
    in-sample difference; seeds continue a forecast past the end.
    """

    order: int
    head_values: tuple
    seed_values: tuple


@dataclass(frozen=True)
class CointegrationResult:
    is_cointegrated: bool
    adf_on_residuals: AdfResult
    intercept: float
    slope: float


def aic(n: int, k: int, rss: float) -> float:
    """Gaussian least-squares AIC, ``n ln(rss/n) + 2k``; ``rss == 0`` gives -inf."""
    if n <= 0:
        raise ValueError("n must be positive")
    if rss < 0:
        raise ValueError("rss must be nonnegative")
    if rss == 0:
        return -math.inf
    return n * math.log(rss / n) + 2 * k


def _ols(X, y):
    """Least squares with a rank check; returns (beta, rss, residuals)."""
    n, k = X.shape
    if n <= k:
        raise SingularRegressionError(f"{n} observations for {k} parameters")
    beta, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    if rank < k or sv[-1] <= sv[0] * 1e-12:
        raise SingularRegressionError("design matrix is rank deficient")
    resid = y - X @ beta
    return beta, float(resid @ resid), resid


def _adf_design(y, lag, first):
    """Rows t = first..n-2 of dy[t] = a + g*y[t] + sum_i phi_i dy[t-i]."""
    dy = np.diff(y)
    t = np.arange(first, dy.shape[0])
    cols = [np.ones(t.shape[0]), y[t]]
    for i in range(1, lag + 1):
        cols.append(dy[t - i])
    return np.column_stack(cols), dy[t]


def default_adf_lag(n: int) -> int:
    return int(12 * (n / 100.0) ** 0.25)


def adf_test(series, max_lag: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller test with a constant, lag order picked by AIC.

    Candidate lags 0..max_lag are compared on a common sample; the chosen
    regression is then refit on all usable rows and the t-ratio of the
    lagged level is compared with the fixed critical values.
    """
    y = np.asarray(series, dtype=np.float64)
    n = y.shape[0]
    if max_lag is None:
        max_lag = max(0, min(default_adf_lag(n), n - 10))
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if n < max_lag + 10:
        raise ValueError(f"series of length {n} too short for max_lag={max_lag}")
    if np.ptp(y) == 0:
        raise SingularRegressionError("series is constant")

    best_lag, best_aic = 0, math.inf
    for lag in range(max_lag + 1):
        X, target = _adf_design(y, lag, max_lag)
        try:
            _, rss, _ = _ols(X, target)
        except SingularRegressionError:
            continue
        value = aic(target.shape[0], X.shape[1], rss)
        if value < best_aic:
            best_lag, best_aic = lag, value

    X, target = _adf_design(y, best_lag, best_lag)
    beta, rss, _ = _ols(X, target)
    dof = X.shape[0] - X.shape[1]
    if rss <= 0:
        raise SingularRegressionError("residual variance is zero")
    s2 = rss / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = math.sqrt(s2 * xtx_inv[1, 1])
    return AdfResult(float(beta[1] / se), best_lag, int(X.shape[0]))


# ------------------------------------------------------------------ differencing

def difference(series, d: int):
    """Apply ``d`` first differences; returns ``(values, DifferencingRecord)``."""
    x = np.asarray(series, dtype=np.float64)
    if d < 0:
        raise ValueError("d must be >= 0")
    if d >= x.shape[0]:
        raise ValueError(f"cannot difference {x.shape[0]} values {d} times")
    heads, seeds = [], []
    z = x
    for _ in range(d):
        heads.append(float(z[0]))
        seeds.append(float(z[-1]))
        z = np.diff(z)
    return z.copy(), DifferencingRecord(d, tuple(heads), tuple(seeds))


def de_difference(diffed, record: DifferencingRecord):
    """Exact inverse of ``difference``: rebuild the original series."""
    z = np.asarray(diffed, dtype=np.float64)
    if len(record.head_values) != record.order:
        raise ValueError("differencing record is missing head values")
    for k in range(record.order - 1, -1, -1):
        head = record.head_values[k]
        z = np.concatenate(([head], head + np.cumsum(z)))
    return z


def integrate_forecast(forecast, record: DifferencingRecord):
    """Carry a forecast made on the differenced scale back to levels."""
    f = np.asarray(forecast, dtype=np.float64)
    if len(record.seed_values) != record.order:
        raise ValueError("differencing record is missing seed values")
    for k in range(record.order - 1, -1, -1):
        f = record.seed_values[k] + np.cumsum(f)
    return f


def stationarize(series, max_d: int = 2, max_lag: int | None = None):
    """Difference until the ADF test rejects a unit root at 5%.

    Returns ``(differenced, d)`` for the smallest passing ``d <= max_d``. A
    series that has become exactly constant counts as stationary; any other
    degenerate regression counts as a failure at that order.
    """
    if max_d < 0:
        raise ValueError("max_d must be >= 0")
    x = np.asarray(series, dtype=np.float64)
    last_stat = None
    for d in range(max_d + 1):
        z, _ = difference(x, d)
        if z.shape[0] and np.ptp(z) == 0:
            return z, d
        try:
            res = adf_test(z, _fit_lag(max_lag, z.shape[0]))
        except SingularRegressionError:
            continue
        except ValueError:
            break
        last_stat = res.statistic
        if res.is_stationary_5pct:
            return z, d
    raise StationarityError(
        f"series still non-stationary after {max_d} differences (last statistic {last_stat})",
        statistic=last_stat,
    )


def _fit_lag(max_lag, n):
    if max_lag is None:
        return max(0, min(default_adf_lag(n), n - 10))
    return min(max_lag, max(0, n - 10))


# --------------------------------------------------------------------- granger

def _lagmat(x, lag, first):
    t = np.arange(first, x.shape[0])
    return np.column_stack([x[t - i] for i in range(1, lag + 1)])


def granger_test(y, x, lag: int):
    """F-test that ``lag`` lags of ``x`` add nothing to an AR(lag) of ``y``.

    Returns ``(F, p_value)``.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    target = y[lag:]
    ones = np.ones((target.shape[0], 1))
    restricted = np.hstack([ones, _lagmat(y, lag, lag)])
    full = np.hstack([restricted, _lagmat(x, lag, lag)])
    _, rss_r, _ = _ols(restricted, target)
    _, rss_u, _ = _ols(full, target)
    df_den = target.shape[0] - full.shape[1]
    if rss_u <= 0:
        raise SingularRegressionError("unrestricted model fits exactly")
    f = ((rss_r - rss_u) / lag) / (rss_u / df_den)
    f = max(f, 0.0)
    return f, float(stats.f.sf(f, lag, df_den))


def granger_matrix(frame: Mapping[str, Sequence[float]], max_lag: int, alpha: float = 0.05) -> GrangerMatrix:
    """Pairwise Granger p-values, minimised over lags 1..max_lag.

    Pairs whose regressions are singular get p = 1.0 and are listed in
    ``flagged``.
    """
    names = tuple(frame)
    data = [np.asarray(frame[k], dtype=np.float64) for k in names]
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    lengths = {a.shape[0] for a in data}
    if len(lengths) != 1:
        raise ValueError("all series must have equal length")
    n = lengths.pop()
    if n < 5 * max_lag:
        raise ValueError(f"need at least {5 * max_lag} observations, have {n}")
    k = len(names)
    p = np.ones((k, k))
    flagged = []
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            best = 1.0
            try:
                for lag in range(1, max_lag + 1):
                    best = min(best, granger_test(data[i], data[j], lag)[1])
            except SingularRegressionError:
                logger.warning("granger: singular design for %s <- %s", names[i], names[j])
                flagged.append((names[i], names[j]))
                best = 1.0
            p[i, j] = min(max(best, 0.0), 1.0)
    return GrangerMatrix(names, p, max_lag, alpha, tuple(flagged))


# ------------------------------------------------------------- residual checks

def durbin_watson(residuals) -> float:
    e = np.asarray(residuals, dtype=np.float64)
    if e.ndim != 1 or e.shape[0] < 2:
        raise ValueError("need at least 2 residuals")
    scale = float(np.max(np.abs(e)))
    if scale == 0:
        raise ValueError("residuals are all zero")
    e = e / scale  # the ratio is scale-free; this keeps tiny residuals from underflowing
    denom = float(e @ e)
    de = np.diff(e)
    return float(de @ de) / denom


def engle_granger_cointegration(x, y, max_lag: int | None = None) -> CointegrationResult:
    """Two-step test: OLS of y on x, then ADF on the residuals.

    The residual statistic is judged against Engle-Granger critical values.

    Identical series (zero residuals) are reported as cointegrated with a
    statistic of -inf.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    if x.shape[0] < 50:
        raise ValueError("need at least 50 observations")
    X = np.column_stack([np.ones_like(x), x])
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    scale = max(float(np.max(np.abs(y))), 1.0)
    if np.max(np.abs(resid)) <= 1e-12 * scale:
        res = AdfResult(-math.inf, 0, int(x.shape[0]), dict(ENGLE_GRANGER_CRITICAL_VALUES))
        return CointegrationResult(True, res, float(beta[0]), float(beta[1]))
    raw = adf_test(resid, max_lag)
    # estimated residuals look more stationary than a raw series, so the
    # Dickey-Fuller table would over-reject
    res = AdfResult(raw.statistic, raw.lags_used, raw.nobs, dict(ENGLE_GRANGER_CRITICAL_VALUES))
    return CointegrationResult(res.is_stationary_5pct, res, float(beta[0]), float(beta[1]))
