"""Multiple linear regression with VIF filtering and backward stepwise AIC."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..econometrics import aic
from ..market_data import FeatureFrame

logger = logging.getLogger(__name__)


class RegressionError(ValueError):
    pass


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: dict
    selected_columns: tuple
    dropped_constant: tuple = ()
    dropped_vif: tuple = ()
    dropped_stepwise: tuple = ()
    ridge: bool = False

    def to_dict(self):
        return {
            "intercept": self.intercept,
            "coefficients": dict(self.coefficients),
            "selected_columns": list(self.selected_columns),
            "dropped_constant": list(self.dropped_constant),
            "dropped_vif": list(self.dropped_vif),
            "dropped_stepwise": list(self.dropped_stepwise),
            "ridge": self.ridge,
        }


def _prepared(frame: FeatureFrame) -> FeatureFrame:
    return frame.dummify() if frame.categorical else frame


def variance_inflation(X: np.ndarray) -> np.ndarray:
    """VIF of every column; exactly collinear columns get ``inf``."""
    n, p = X.shape
    if p == 0:
        return np.empty(0)
    if p == 1:
        return np.ones(1)
    out = np.empty(p)
    Xc = X - X.mean(axis=0)
    for j in range(p):
        target = Xc[:, j]
        tss = float(target @ target)
        others = np.delete(Xc, j, axis=1)
        beta, *_ = np.linalg.lstsq(others, target, rcond=None)
        resid = target - others @ beta
        rss = float(resid @ resid)
        out[j] = np.inf if rss <= 1e-12 * tss else tss / rss
    return out


def _standardize(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd, mu, sd


def _solve_normal(Z, yc):
    """Normal-equation solve on centred/scaled columns, ridge only if singular."""
    G = Z.T @ Z
    rhs = Z.T @ yc
    ridge = False
    if G.shape[0] and np.linalg.cond(G) > 1e12:
        G = G + 1e-8 * np.trace(G) * np.eye(G.shape[0])
        ridge = True
    try:
        beta = np.linalg.solve(G, rhs) if G.shape[0] else np.empty(0)
    except np.linalg.LinAlgError:
        G = G + 1e-8 * max(np.trace(G), 1.0) * np.eye(G.shape[0])
        beta = np.linalg.solve(G, rhs)
        ridge = True
    return beta, ridge


def _rss_and_drop_costs(Z, yc):
    """RSS of the centred fit and the RSS after removing each column."""
    beta, _ = _solve_normal(Z, yc)
    resid = yc - Z @ beta
    rss = float(resid @ resid)
    if Z.shape[1] == 0:
        return rss, np.empty(0)
    ginv = np.linalg.pinv(Z.T @ Z)
    diag = np.diag(ginv)
    with np.errstate(divide="ignore", invalid="ignore"):
        increase = np.where(diag > 0, beta ** 2 / diag, np.inf)
    return rss, rss + increase


def ols_fit(frame: FeatureFrame, vif_threshold: float = 10.0, stepwise: bool = True) -> LinearModel:
    """Fit close ~ predictors after collinearity and stepwise selection.

    Categorical columns are dummified first. Zero-variance columns go, then
    the highest-VIF column is dropped until every VIF is below
    ``vif_threshold``. With ``stepwise`` the column whose removal gives the
    lowest AIC is dropped while that AIC is no worse than the current one.
    """
    fr = _prepared(frame)
    names = fr.names
    X = fr.matrix(names)
    y = fr.target.astype(np.float64)
    n = X.shape[0]
    if n < 2:
        raise RegressionError("need at least 2 rows")

    const = [nm for j, nm in enumerate(names) if np.ptp(X[:, j]) == 0]
    keep = [j for j, nm in enumerate(names) if nm not in const]

    dropped_vif = []
    while len(keep) > 1:
        vif = variance_inflation(X[:, keep])
        if np.max(vif) < vif_threshold:
            break
        worst = len(vif) - 1 - int(np.argmax(vif[::-1]))  # ties drop the later column
        dropped_vif.append(names[keep[worst]])
        del keep[worst]

    if n <= len(keep) + 1:
        raise RegressionError(f"{n} rows cannot fit {len(keep)} predictors plus intercept")

    Xk, mu, sd = _standardize(X[:, keep])
    yc = y - y.mean()
    dropped_step = []
    if stepwise:
        cols = list(range(len(keep)))
        while cols:
            rss, drop_rss = _rss_and_drop_costs(Xk[:, cols], yc)
            current = aic(n, len(cols) + 1, max(rss, 0.0))
            candidates = [aic(n, len(cols), max(r, 0.0)) for r in drop_rss]
            j = int(np.argmin(candidates))
            if candidates[j] <= current:
                dropped_step.append(names[keep[cols[j]]])
                del cols[j]
            else:
                break
        keep = [keep[c] for c in cols]
        Xk, mu, sd = _standardize(X[:, keep])

    beta_s, ridge = _solve_normal(Xk, yc)
    coef = beta_s / sd
    intercept = float(y.mean() - coef @ mu) if len(keep) else float(y.mean())
    if ridge:
        logger.warning("ols_fit: Gram matrix singular, used ridge fallback")
    selected = tuple(names[j] for j in keep)
    return LinearModel(
        intercept,
        {nm: float(c) for nm, c in zip(selected, coef)},
        selected,
        tuple(const),
        tuple(dropped_vif),
        tuple(dropped_step),
        ridge,
    )


def ols_predict(model: LinearModel, frame: FeatureFrame) -> np.ndarray:
    fr = _prepared(frame)
    missing = [c for c in model.selected_columns if c not in fr.columns]
    if missing:
        raise KeyError(f"frame is missing columns {missing}")
    out = np.full(len(fr), model.intercept)
    for name in model.selected_columns:
        out = out + model.coefficients[name] * fr.columns[name]
    return out
