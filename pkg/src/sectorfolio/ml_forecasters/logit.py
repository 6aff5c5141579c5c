"""Binary logistic regression by iteratively reweighted least squares."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._common import query_matrix, training_arrays, zscore_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LogitModel:
    intercept: float
    coefficients: np.ndarray
    feature_names: tuple
    converged: bool
    n_iter: int
    gradient_norm: float = field(default=float("nan"))
    classes: tuple = (0.0, 1.0)

    def to_dict(self):
        return {
            "intercept": self.intercept,
            "coefficients": dict(zip(self.feature_names, self.coefficients.tolist())),
            "converged": self.converged,
            "n_iter": self.n_iter,
            "gradient_norm": self.gradient_norm,
        }


def logit_fit(frame, max_iter: int = 100, tol: float = 1e-8) -> LogitModel:
    """Maximum-likelihood logistic regression on a 0/1 target.

    Newton steps run on z-scored columns (zero-variance columns get a zero
    weight). The fit counts as converged once the score vector's max-norm
    is below ``tol`` and the last step is negligible next to the
    coefficients; a linearly separable sample never gets there and comes
    back with ``converged=False`` after ``max_iter`` steps.
    """
    X, y, names = training_arrays(frame)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic regression needs a 0/1 target")
    n, nf = X.shape
    mu, sd = zscore_params(X)
    live = np.flatnonzero(X.std(axis=0) > 0)
    Z = np.column_stack([np.ones(n), (X[:, live] - mu[live]) / sd[live]])
    beta = np.zeros(Z.shape[1])
    converged = False
    it = 0
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        p = expit(Z @ beta)
        grad = Z.T @ (y - p)
        grad_norm = float(np.max(np.abs(grad)))
        w = p * (1.0 - p)
        H = Z.T @ (Z * w[:, None])
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        beta = beta + step
        if grad_norm < tol and np.max(np.abs(step)) <= 1e-6 * (1.0 + np.max(np.abs(beta))):
            converged = True
            break
    p = expit(Z @ beta)
    grad_norm = float(np.max(np.abs(Z.T @ (y - p))))
    if not converged:
        logger.warning("logit_fit: no convergence after %d iterations (separable data?)", it)
    coef = np.zeros(nf)
    coef[live] = beta[1:] / sd[live]
    intercept = float(beta[0] - coef[live] @ mu[live])
    return LogitModel(intercept, coef, names, converged, it, grad_norm)


def logit_decision(model: LogitModel, data) -> np.ndarray:
    return model.intercept + query_matrix(data, model.feature_names) @ model.coefficients


def logit_predict_proba(model: LogitModel, data) -> np.ndarray:
    return expit(logit_decision(model, data))


def logit_predict(model: LogitModel, data) -> np.ndarray:
    return (logit_predict_proba(model, data) >= 0.5).astype(np.float64)
