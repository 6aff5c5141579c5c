"""CART regression and classification trees.

Split search runs in the compiled kernels; the tree itself is stored as flat
arrays so prediction is a vectorized descent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ._common import check_task, query_matrix, training_arrays

LEAF = -1


@dataclass(frozen=True)
class CartTree:
    task: str
    feature_names: tuple
    feature: np.ndarray          # split column per node, LEAF for leaves
    threshold: np.ndarray        # go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray            # leaf prediction (mean or class label)
    n_samples: np.ndarray
    impurity_decrease: np.ndarray = field(repr=False)
    classes: np.ndarray = field(default=None, repr=False)
    max_depth: int | None = None
    min_impurity_decrease: float = 0.0

    @property
    def n_nodes(self):
        return int(self.feature.shape[0])

    @property
    def n_leaves(self):
        return int(np.sum(self.feature == LEAF))

    def depth(self):
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max()) if self.n_nodes else 0

    def to_dict(self):
        return {"task": self.task, "n_nodes": self.n_nodes, "n_leaves": self.n_leaves,
                "depth": self.depth(), "max_depth": self.max_depth,
                "min_impurity_decrease": self.min_impurity_decrease}


def _majority(codes, n_classes):
    return int(np.argmax(np.bincount(codes, minlength=n_classes)))


def build_tree(X, y, task, feature_names, max_depth=None, min_impurity_decrease=0.0,
               max_features=None, rng=None, rows=None, classes=None):
    """Grow a tree on ``X[rows]``.

    ``max_features`` < number of columns draws that many candidate columns
    per split from ``rng``; otherwise every column is searched in order.
    """
    n, nf = X.shape
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=np.intp)
    if max_features is None or max_features >= nf:
        max_features = nf
    all_features = np.arange(nf, dtype=np.intp)
    if task == "classification":
        if classes is None:
            classes = np.unique(y[rows])
        codes = np.searchsorted(classes, y).astype(np.intp)
        n_classes = classes.shape[0]

    feature, threshold, left, right, value, count, gain = [], [], [], [], [], [], []

    def new_node(node_rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        if task == "regression":
            value.append(float(np.mean(y[node_rows])))
        else:
            value.append(float(classes[_majority(codes[node_rows], n_classes)]))
        count.append(int(node_rows.shape[0]))
        gain.append(0.0)
        return len(feature) - 1

    yc = np.array(y, dtype=np.float64) if task == "regression" else None
    stack = [(new_node(rows), rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if node_rows.shape[0] < 2:
            continue
        if task == "regression":
            vals = y[node_rows]
            if np.ptp(vals) == 0:
                continue
            yc[node_rows] = vals - vals.mean()
        elif np.all(codes[node_rows] == codes[node_rows[0]]):
            continue
        if max_features < nf:
            feats = np.sort(rng.choice(nf, size=max_features, replace=False)).astype(np.intp)
        else:
            feats = all_features
        if task == "regression":
            f, t, dec = kernels.best_split_mse(X, yc, node_rows, feats)
        else:
            f, t, dec = kernels.best_split_gini(X, codes, n_classes, node_rows, feats)
        if f < 0 or dec <= 0 or dec < min_impurity_decrease:
            continue
        go_left = X[node_rows, f] <= t
        lrows, rrows = node_rows[go_left], node_rows[~go_left]
        if lrows.shape[0] == 0 or rrows.shape[0] == 0:
            continue
        feature[node] = int(f)
        threshold[node] = float(t)
        gain[node] = float(dec)
        li = new_node(lrows)
        ri = new_node(rrows)
        left[node], right[node] = li, ri
        # right first so the left subtree is expanded (and numbered) first
        stack.append((ri, rrows, depth + 1))
        stack.append((li, lrows, depth + 1))

    return CartTree(
        task, tuple(feature_names),
        np.array(feature, dtype=np.intp), np.array(threshold), np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp), np.array(value), np.array(count, dtype=np.intp),
        np.array(gain), classes, max_depth, float(min_impurity_decrease),
    )


def cart_fit(frame, max_depth: int | None = None, min_impurity_decrease: float = 0.0,
             task: str = "regression") -> CartTree:
    """Greedy CART on every column (raw features, no scaling)."""
    check_task(task)
    if max_depth is not None and max_depth < 0:
        raise ValueError("max_depth must be >= 0 or None")
    X, y, names = training_arrays(frame)
    if X.shape[0] < 2:
        raise ValueError("cart_fit needs at least 2 rows")
    return build_tree(X, y, task, names, max_depth, min_impurity_decrease)


def tree_apply(tree: CartTree, X) -> np.ndarray:
    """Leaf index reached by every row of ``X`` (already in feature order)."""
    node = np.zeros(X.shape[0], dtype=np.intp)
    active = tree.feature[node] != LEAF
    while np.any(active):
        idx = np.flatnonzero(active)
        nd = node[idx]
        go_left = X[idx, tree.feature[nd]] <= tree.threshold[nd]
        node[idx] = np.where(go_left, tree.left[nd], tree.right[nd])
        active[idx] = tree.feature[node[idx]] != LEAF
    return node


def cart_predict(tree: CartTree, data) -> np.ndarray:
    X = query_matrix(data, tree.feature_names)
    return tree.value[tree_apply(tree, X)]
