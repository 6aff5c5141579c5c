"""k-nearest-neighbour regression and classification on z-scored features."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._common import check_task, query_matrix, training_arrays, zscore_params

_CHUNK = 512


@dataclass(frozen=True)
class KnnModel:
    k: int
    task: str
    feature_names: tuple
    mean: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"k": self.k, "task": self.task, "features": list(self.feature_names),
                "n_train": int(self.y.shape[0]), "distance": "euclidean", "weights": "uniform"}


def knn_fit(frame, k: int = 5, task: str = "regression") -> KnnModel:
    check_task(task)
    X, y, names = training_arrays(frame)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} training rows")
    mu, sd = zscore_params(X)
    return KnnModel(k, task, names, mu, sd, (X - mu) / sd, y.copy())


def neighbours(model: KnnModel, data) -> np.ndarray:
    """Indices of the k nearest training rows; distance ties go to the earlier row."""
    Q = (query_matrix(data, model.feature_names) - model.mean) / model.scale
    out = np.empty((Q.shape[0], model.k), dtype=np.intp)
    for s in range(0, Q.shape[0], _CHUNK):
        q = Q[s:s + _CHUNK]
        d2 = np.sum((q[:, None, :] - model.X[None, :, :]) ** 2, axis=2)
        out[s:s + _CHUNK] = np.argsort(d2, axis=1, kind="stable")[:, :model.k]
    return out


def knn_predict(model: KnnModel, data) -> np.ndarray:
    """Mean of the neighbours' targets, or their majority class.

    Equal vote counts resolve to the smallest class label.
    """
    idx = neighbours(model, data)
    vals = model.y[idx]
    if model.task == "regression":
        return vals.mean(axis=1)
    classes = np.unique(model.y)
    counts = (vals[:, :, None] == classes[None, None, :]).sum(axis=1)
    return classes[np.argmax(counts, axis=1)]
