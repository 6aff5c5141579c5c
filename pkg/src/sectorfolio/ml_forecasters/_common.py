"""Shared helpers for the machine-learning forecasters."""
from __future__ import annotations

import numpy as np

from ..market_data import FeatureFrame

TASKS = ("regression", "classification")


def check_task(task):
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    return task


def training_arrays(frame: FeatureFrame):
    """(X, y, feature names) from a frame, with finite-value checks."""
    names = tuple(frame.names)
    X = frame.matrix(names).astype(np.float64)
    y = np.asarray(frame.target, dtype=np.float64)
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("training data contains non-finite values")
    return X, y, names


def query_matrix(data, names):
    """Accept a FeatureFrame or a 2-d array laid out in ``names`` order."""
    if isinstance(data, FeatureFrame):
        return data.matrix(names).astype(np.float64)
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != len(names):
        raise ValueError(f"expected {len(names)} columns, got {X.shape[1]}")
    return X


def zscore_params(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    return mu, np.where(sd > 0, sd, 1.0)
