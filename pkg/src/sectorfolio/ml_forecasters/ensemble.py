"""Random forests and gradient-boosted trees built on ``tree.build_tree``."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._common import check_task, query_matrix, training_arrays
from .tree import build_tree, tree_apply

logger = logging.getLogger(__name__)


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index``; does not depend on build order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _resolve_fraction(feature_fraction, task, n_features):
    if feature_fraction is None:
        feature_fraction = 1.0 / 3.0 if task == "regression" else "sqrt"
    if feature_fraction == "sqrt":
        m = int(math.sqrt(n_features))
    else:
        f = float(feature_fraction)
        if not 0.0 < f <= 1.0:
            raise ValueError("feature_fraction must be in (0, 1] or 'sqrt'")
        m = int(f * n_features + 1e-9)
    return feature_fraction, max(1, min(n_features, m))


@dataclass(frozen=True)
class ForestModel:
    task: str
    feature_names: tuple
    trees: tuple = field(repr=False)
    n_trees: int = 100
    seed: int = 0
    feature_fraction: object = None
    max_features: int = 1
    bootstrap: bool = True
    classes: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"task": self.task, "n_trees": self.n_trees, "seed": self.seed,
                "feature_fraction": self.feature_fraction, "max_features": self.max_features,
                "bootstrap": self.bootstrap,
                "mean_leaves": float(np.mean([t.n_leaves for t in self.trees])) if self.trees else 0.0}


def forest_fit(frame, n_trees: int = 100, feature_fraction=None, seed: int = 0,
               task: str = "regression", bootstrap: bool = True, max_depth: int | None = None,
               min_impurity_decrease: float = 0.0, n_jobs: int = 1) -> ForestModel:
    """Bagged CART trees with per-split column subsampling.

    Tree ``i`` draws its bootstrap rows and split columns from its own
    stream derived from ``(seed, i)``, so the result does not depend on
    ``n_jobs``.
    """
    check_task(task)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X, y, names = training_arrays(frame)
    n = X.shape[0]
    if n < 2:
        raise ValueError("forest_fit needs at least 2 rows")
    fraction, m = _resolve_fraction(feature_fraction, task, X.shape[1])
    classes = np.unique(y) if task == "classification" else None

    def grow(i):
        rng = tree_rng(seed, i)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        return build_tree(X, y, task, names, max_depth, min_impurity_decrease,
                          max_features=m, rng=rng, rows=rows, classes=classes)

    if n_jobs == 1:
        trees = [grow(i) for i in range(n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=None if n_jobs < 1 else n_jobs) as pool:
            trees = list(pool.map(grow, range(n_trees)))
    return ForestModel(task, names, tuple(trees), n_trees, seed, fraction, m, bootstrap, classes)


def forest_predict(model: ForestModel, data) -> np.ndarray:
    """Average of the trees (regression) or majority vote, ties to the smallest label."""
    X = query_matrix(data, model.feature_names)
    preds = np.stack([t.value[tree_apply(t, X)] for t in model.trees])
    if model.task == "regression":
        return preds.mean(axis=0)
    counts = (preds[:, :, None] == model.classes[None, None, :]).sum(axis=0)
    return model.classes[np.argmax(counts, axis=1)]


@dataclass(frozen=True)
class GbmModel:
    task: str
    feature_names: tuple
    initial: float
    trees: tuple = field(repr=False)
    leaf_values: tuple = field(repr=False)
    learning_rate: float = 0.1
    n_stages: int = 100
    max_depth: int = 3
    train_loss: np.ndarray = field(default=None, repr=False)
    classes: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"task": self.task, "initial": self.initial, "n_stages": self.n_stages,
                "learning_rate": self.learning_rate, "max_depth": self.max_depth,
                "final_train_loss": float(self.train_loss[-1]) if self.train_loss is not None else None}


def _logistic_loss(ypm, F):
    # mean of log(1 + exp(-2 y F)) for labels y in {-1, +1}
    return float(np.mean(np.logaddexp(0.0, -2.0 * ypm * F)))


def gbm_fit(frame, n_stages: int = 100, learning_rate: float = 0.1, max_depth: int = 3,
            seed: int = 0, task: str = "regression", subsample: float = 1.0) -> GbmModel:
    """Stagewise additive trees.

    Regression fits each tree to the current residuals (squared loss).
    Classification maps the two classes to -1/+1, fits trees to the
    logistic-loss gradient and sets each leaf by a single Newton step.
    ``train_loss[s]`` is the training loss after ``s`` stages. With
    ``subsample < 1`` every stage sees a random share of rows drawn from a
    stream derived from ``(seed, stage)``.
    """
    check_task(task)
    if n_stages < 0:
        raise ValueError("n_stages must be >= 0")
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must be in (0, 1]")
    if not 0.0 < subsample <= 1.0:
        raise ValueError("subsample must be in (0, 1]")
    X, y, names = training_arrays(frame)
    n = X.shape[0]
    if n < 2:
        raise ValueError("gbm_fit needs at least 2 rows")

    classes = None
    if task == "classification":
        classes = np.unique(y)
        if classes.shape[0] != 2:
            raise ValueError("gradient-boosted classification needs exactly two classes")
        ypm = np.where(y == classes[1], 1.0, -1.0)
        ybar = float(np.clip(ypm.mean(), -1 + 1e-12, 1 - 1e-12))
        initial = 0.5 * math.log((1.0 + ybar) / (1.0 - ybar))
    else:
        initial = float(y.mean())
    F = np.full(n, initial)
    losses = [_logistic_loss(ypm, F) if classes is not None else float(np.mean((y - F) ** 2))]
    trees, leaves = [], []
    for stage in range(n_stages):
        if subsample < 1.0:
            rng = tree_rng(seed, stage)
            rows = np.sort(rng.choice(n, size=max(2, int(subsample * n)), replace=False))
        else:
            rows = np.arange(n)
        if classes is None:
            resid = y - F
            tree = build_tree(X, resid, "regression", names, max_depth, rows=rows)
            leaf_vals = tree.value.copy()
        else:
            resid = 2.0 * ypm / (1.0 + np.exp(np.clip(2.0 * ypm * F, -700, 700)))
            tree = build_tree(X, resid, "regression", names, max_depth, rows=rows)
            leaf_of = tree_apply(tree, X[rows])
            leaf_vals = np.zeros(tree.n_nodes)
            num = np.bincount(leaf_of, weights=resid[rows], minlength=tree.n_nodes)
            a = np.abs(resid[rows])
            den = np.bincount(leaf_of, weights=a * (2.0 - a), minlength=tree.n_nodes)
            ok = den > 1e-300
            leaf_vals[ok] = num[ok] / den[ok]
        F = F + learning_rate * leaf_vals[tree_apply(tree, X)]
        trees.append(tree)
        leaves.append(leaf_vals)
        losses.append(_logistic_loss(ypm, F) if classes is not None else float(np.mean((y - F) ** 2)))
    return GbmModel(task, names, initial, tuple(trees), tuple(leaves), learning_rate,
                    n_stages, max_depth, np.array(losses), classes)


def gbm_decision(model: GbmModel, data, stages: int | None = None) -> np.ndarray:
    X = query_matrix(data, model.feature_names)
    F = np.full(X.shape[0], model.initial)
    k = len(model.trees) if stages is None else min(stages, len(model.trees))
    for tree, vals in zip(model.trees[:k], model.leaf_values[:k]):
        F = F + model.learning_rate * vals[tree_apply(tree, X)]
    return F


def gbm_predict_proba(model: GbmModel, data) -> np.ndarray:
    if model.task != "classification":
        raise ValueError("probabilities are only defined for classification")
    return expit(2.0 * gbm_decision(model, data))


def gbm_predict(model: GbmModel, data) -> np.ndarray:
    F = gbm_decision(model, data)
    if model.task == "regression":
        return F
    return np.where(expit(2.0 * F) >= 0.5, model.classes[1], model.classes[0])
