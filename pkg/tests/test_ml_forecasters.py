import numpy as np
import pytest
from conftest import frame_from_arrays, noisy_sine

from sectorfolio.ml_forecasters import (
    cart_fit, cart_predict, forest_fit, forest_predict, gbm_fit, gbm_predict, gbm_predict_proba,
    knn_fit, knn_predict, logit_fit, logit_predict, logit_predict_proba,
)


def rmse(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


# -------------------------------------------------------------------- KNN

def test_knn_examples():
    X = np.arange(10.0)[:, None]
    y = X[:, 0] * 2
    m = knn_fit(frame_from_arrays(X, y), k=1)
    assert knn_predict(m, np.array([[3.0]]))[0] == 6.0
    const = knn_fit(frame_from_arrays(X, np.full(10, 10.0)), k=5)
    assert np.all(knn_predict(const, np.array([[-4.0], [100.0]])) == 10.0)
    m5 = knn_fit(frame_from_arrays(np.array([[0.], [1.], [2.], [3.], [4.], [50.]]), [1, 2, 3, 4, 5, 99]), k=5)
    assert knn_predict(m5, np.array([[2.0]]))[0] == 3.0


def test_knn_k_equals_n_is_global_mean():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    m = knn_fit(frame_from_arrays(X, y), k=30)
    np.testing.assert_allclose(knn_predict(m, rng.normal(size=(5, 2))), y.mean(), rtol=1e-12)


def test_knn_k_too_large():
    with pytest.raises(ValueError):
        knn_fit(frame_from_arrays(np.zeros((3, 1)), [1, 2, 3]), k=4)


def test_knn_vote_ties_to_smallest_label():
    m = knn_fit(frame_from_arrays(np.array([[0.0], [1.0]]), [1.0, 0.0]), k=2, task="classification")
    assert knn_predict(m, np.array([[0.5]]))[0] == 0.0


# ------------------------------------------------------------------- CART

def test_cart_depth_zero_is_mean():
    rng = np.random.default_rng(1)
    fr = frame_from_arrays(rng.normal(size=(20, 2)), rng.normal(size=20))
    t = cart_fit(fr, max_depth=0)
    assert t.n_nodes == 1
    np.testing.assert_allclose(cart_predict(t, fr), fr.target.mean())


def test_cart_separable_step():
    x = np.array([-1.0, -1.0, 1.0, 1.0, -1.0, 1.0])
    y = (x >= 0).astype(float)
    t = cart_fit(frame_from_arrays(x[:, None], y))
    assert t.depth() == 1
    np.testing.assert_array_equal(cart_predict(t, frame_from_arrays(x[:, None], y)), y)
    tc = cart_fit(frame_from_arrays(x[:, None], y), task="classification")
    assert tc.depth() == 1


def test_cart_constant_target_single_leaf():
    fr = frame_from_arrays(np.random.default_rng(2).normal(size=(25, 3)), np.full(25, 3.0))
    assert cart_fit(fr, max_depth=10).n_nodes == 1


def test_cart_min_impurity_decrease_prunes():
    train, _ = noisy_sine()
    full = cart_fit(train)
    small = cart_fit(train, min_impurity_decrease=0.01)
    assert small.n_leaves < full.n_leaves


# ----------------------------------------------------------------- forest

def test_forest_beats_single_tree_on_noisy_sine():
    train, test = noisy_sine(42)
    tree = rmse(cart_predict(cart_fit(train), test), test.target)
    forest = rmse(forest_predict(forest_fit(train, seed=42), test), test.target)
    assert forest <= tree


def test_forest_reduces_to_cart():
    train, test = noisy_sine(3, n=120)
    f = forest_fit(train, n_trees=1, feature_fraction=1.0, bootstrap=False)
    np.testing.assert_array_equal(forest_predict(f, test), cart_predict(cart_fit(train), test))


def test_forest_deterministic_and_parallel_invariant():
    train, test = noisy_sine(5, n=120)
    a = forest_predict(forest_fit(train, n_trees=12, seed=7), test)
    b = forest_predict(forest_fit(train, n_trees=12, seed=7, n_jobs=4), test)
    c = forest_predict(forest_fit(train, n_trees=12, seed=8), test)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forest_classification():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 4))
    y = (X[:, 0] + X[:, 1] > 0).astype(float)
    fr = frame_from_arrays(X, y)
    m = forest_fit(fr, n_trees=25, task="classification")
    assert m.max_features == 2
    assert np.mean(forest_predict(m, fr) == y) > 0.95


# -------------------------------------------------------------------- GBM

def test_gbm_zero_stages_is_mean():
    train, test = noisy_sine(1, n=60)
    m = gbm_fit(train, n_stages=0)
    np.testing.assert_allclose(gbm_predict(m, test), train.target.mean())


def test_gbm_loss_non_increasing():
    train, _ = noisy_sine(2)
    m = gbm_fit(train, n_stages=100)
    assert np.all(np.diff(m.train_loss) <= 0)
    assert m.train_loss[-1] <= m.train_loss[1]


def test_gbm_fits_step_function():
    x = np.linspace(0, 1, 200)
    y = np.where(x < 0.3, 0.0, np.where(x < 0.7, 1.0, -0.5))
    fr = frame_from_arrays(x[:, None], y)
    m = gbm_fit(fr, n_stages=100)
    assert rmse(gbm_predict(m, fr), y) < 0.05


def test_gbm_classification():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(150, 2))
    y = (X[:, 0] > 0.2).astype(float)
    fr = frame_from_arrays(X, y)
    m = gbm_fit(fr, n_stages=50, task="classification")
    p = gbm_predict_proba(m, fr)
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(np.diff(m.train_loss) <= 1e-12)
    assert np.mean(gbm_predict(m, fr) == y) > 0.95


# ------------------------------------------------------------------ logit

def test_logit_balanced_intercept_only():
    m = logit_fit(frame_from_arrays(np.empty((10, 0)), np.array([0, 1] * 5, dtype=float)))
    np.testing.assert_allclose(logit_predict_proba(m, np.empty((3, 0))), 0.5, atol=1e-9)
    assert m.converged


def test_logit_zero_row_is_sigmoid_intercept():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(300, 2))
    y = (X[:, 0] - X[:, 1] + rng.logistic(size=300) > 0).astype(float)
    m = logit_fit(frame_from_arrays(X, y))
    assert m.converged
    p0 = logit_predict_proba(m, np.zeros((1, 2)))[0]
    assert p0 == pytest.approx(1 / (1 + np.exp(-m.intercept)), rel=1e-12)


def test_logit_separable_flags_non_convergence():
    x = np.concatenate([np.linspace(-3, -0.5, 20), np.linspace(0.5, 3, 20)])
    y = (x > 0).astype(float)
    fr = frame_from_arrays(x[:, None], y)
    m = logit_fit(fr)
    assert not m.converged
    assert np.mean(logit_predict(m, fr) == y) == 1.0
