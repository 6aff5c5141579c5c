import numpy as np
import pytest
from conftest import ar1_series, frame_from_arrays

from sectorfolio import econometrics as ec
from sectorfolio.stat_forecasters import (
    ArimaError, arima_fit, arima_forecast, mars_fit, mars_predict, ols_fit, ols_predict,
    var_fit, var_forecast,
)
from sectorfolio.stat_forecasters.mars import gcv
from sectorfolio.stat_forecasters.var import VarModel


# ------------------------------------------------------------------ ARIMA

def test_arima_recovers_ar1():
    m = arima_fit(ar1_series(0))
    assert m.order[1] == 0 and m.order[0] >= 1
    assert abs(m.ar_coeffs[0] - 0.5) < 0.1


def test_arima_random_walk_is_differenced():
    y = 100 + np.cumsum(np.random.default_rng(3).normal(size=300))
    assert arima_fit(y).order[1] == 1


def test_arima_constant_series():
    m = arima_fit(np.full(80, 7.5))
    np.testing.assert_array_equal(arima_forecast(m, 5), np.full(5, 7.5))


def test_arima_short_series_rejected():
    with pytest.raises(ArimaError):
        arima_fit(np.arange(20.0))


def test_arima_forecast_recursion_closed_form():
    m = arima_fit(ar1_series(1), max_p=1, max_q=0)
    assert m.order == (1, 0, 0)
    v = m.history[-1]
    f = arima_forecast(m, 6, differenced=True)
    expect = []
    cur = v
    for _ in range(6):
        cur = m.intercept + m.ar_coeffs[0] * cur
        expect.append(cur)
    np.testing.assert_allclose(f, expect, rtol=1e-12)


def test_arima_ma_forecast_reverts_to_intercept():
    rng = np.random.default_rng(4)
    e = rng.normal(size=801)
    y = 3.0 + e[1:] + 0.6 * e[:-1]
    m = arima_fit(y, max_p=0, max_q=1)
    assert m.order == (0, 0, 1)
    f = arima_forecast(m, 5)
    np.testing.assert_allclose(f[1:], m.intercept)


def test_arima_horizon_from_short_window():
    y = 500 + np.cumsum(np.random.default_rng(8).normal(size=122))
    assert arima_forecast(arima_fit(y), 14).shape == (14,)


# -------------------------------------------------------------------- OLS

def test_ols_exact_linear():
    x = np.linspace(-3, 5, 40)
    m = ols_fit(frame_from_arrays(x[:, None], 2 * x + 1), stepwise=False)
    assert m.intercept == pytest.approx(1.0, abs=1e-9)
    assert m.coefficients["x0"] == pytest.approx(2.0, abs=1e-9)
    np.testing.assert_allclose(ols_predict(m, frame_from_arrays(x[:, None], x)), 2 * x + 1, atol=1e-9)


def test_ols_duplicate_column_removed_by_vif():
    x = np.random.default_rng(0).normal(size=50)
    m = ols_fit(frame_from_arrays(np.column_stack([x, x]), 3 * x), stepwise=False)
    assert len(m.dropped_vif) == 1
    assert len(m.selected_columns) == 1


def test_stepwise_drops_noise_column():
    rng = np.random.default_rng(42)
    x = rng.normal(size=200)
    z = rng.normal(size=200)
    y = 2 * x + 1 + rng.normal(0, 0.5, size=200)
    m = ols_fit(frame_from_arrays(np.column_stack([x, z]), y, ["x", "z"]))
    assert m.selected_columns == ("x",)
    assert m.dropped_stepwise == ("z",)
    # oracle: the AIC without z is lower, computed directly
    def rss(X):
        A = np.column_stack([np.ones(200), X])
        r = y - A @ np.linalg.lstsq(A, y, rcond=None)[0]
        return float(r @ r)
    assert ec.aic(200, 2, rss(x[:, None])) < ec.aic(200, 3, rss(np.column_stack([x, z])))


# ------------------------------------------------------------------- MARS

def test_mars_hinge_exact():
    x = np.linspace(0, 1, 41)
    y = np.maximum(0, x - 0.5)
    fr = frame_from_arrays(x[:, None], y)
    m = mars_fit(fr)
    rmse = np.sqrt(np.mean((mars_predict(m, fr) - y) ** 2))
    assert rmse < 1e-8


def test_mars_linear_target():
    x = np.linspace(0, 1, 60)
    fr = frame_from_arrays(x[:, None], 3 * x)
    m = mars_fit(fr)
    assert np.sqrt(np.mean((mars_predict(m, fr) - 3 * x) ** 2)) < 1e-6


def test_mars_constant_target_is_intercept_only():
    x = np.random.default_rng(0).normal(size=(80, 2))
    m = mars_fit(frame_from_arrays(x, np.full(80, 4.0)))
    assert m.basis_terms == ()
    assert m.intercept == pytest.approx(4.0)


def test_mars_missing_column_raises():
    x = np.linspace(0, 1, 30)
    m = mars_fit(frame_from_arrays(np.column_stack([x, x ** 2]), np.maximum(0, x - 0.3)))
    used = {h.column for t in m.basis_terms for h in t.factors}
    assert used
    with pytest.raises(KeyError):
        mars_predict(m, frame_from_arrays(x[:, None], x, names=["unrelated"]))


def test_gcv_penalizes_terms():
    assert gcv(10.0, 100, 5) > gcv(10.0, 100, 2)


def test_mars_pruning_does_not_increase_gcv():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(150, 3))
    y = np.abs(X[:, 0]) + 0.5 * np.maximum(0, X[:, 1]) + rng.normal(0, 0.05, 150)
    m = mars_fit(frame_from_arrays(X, y), max_terms=21, max_degree=2)
    assert m.gcv <= m.forward_gcv + 1e-12
    assert all(t.degree <= 2 for t in m.basis_terms)
    assert len(m.basis_terms) + 1 <= m.forward_terms


# -------------------------------------------------------------------- VAR

def _simulate_var1(A, n, seed):
    rng = np.random.default_rng(seed)
    Z = np.zeros((n + 100, A.shape[0]))
    for t in range(1, n + 100):
        Z[t] = A @ Z[t - 1] + rng.normal(size=A.shape[0])
    return Z[100:]


def test_var_recovers_coefficients():
    A = np.array([[0.5, 0.2], [-0.3, 0.4]])
    Z = _simulate_var1(A, 2000, 42)
    m = var_fit({"a": Z[:, 0], "b": Z[:, 1]}, p_max=5)
    assert m.order == 1
    assert m.differencing_orders == (0, 0)
    np.testing.assert_allclose(m.coefficient_matrices[0], A, atol=0.05)
    for v in m.durbin_watson.values():
        assert 1.7 <= v <= 2.3


def test_var_white_noise_picks_small_order():
    small = 0
    for seed in range(20):
        Z = np.random.default_rng(seed).normal(size=(300, 3))
        small += var_fit({k: Z[:, i] for i, k in enumerate("abc")}, p_max=5).order <= 2
    assert small >= 18


def _manual_model(mats, intercept, history, records):
    K = intercept.shape[0]
    return VarModel(tuple(f"v{i}" for i in range(K)), mats.shape[0], mats, intercept,
                    tuple(r.order for r in records), tuple(records), {}, np.eye(K), history)


def test_var_forecast_fixed_point_and_intercept_path():
    rec = ec.DifferencingRecord(0, (), ())
    m = _manual_model(np.eye(2)[None], np.zeros(2), np.array([[3.0, -1.0]]), [rec, rec])
    np.testing.assert_allclose(var_forecast(m, 4), np.tile([3.0, -1.0], (4, 1)))
    _, rec1 = ec.difference(np.array([0.0, 1.0, 5.0]), 1)
    m0 = _manual_model(np.zeros((1, 1, 1)), np.array([2.0]), np.array([[7.0]]), [rec1])
    np.testing.assert_allclose(var_forecast(m0, 3)[:, 0], [7.0, 9.0, 11.0])


def test_var_forecast_difference_round_trip():
    rng = np.random.default_rng(2)
    cols = {k: 50 + np.cumsum(rng.normal(size=300)) for k in ("open", "close")}
    m = var_fit(cols, p_max=4)
    assert set(m.differencing_orders) == {1}
    lev = var_forecast(m, 6)
    dif = var_forecast(m, 6, differenced=True)
    for j, name in enumerate(m.variables):
        joined = np.concatenate(([cols[name][-1]], lev[:, j]))
        np.testing.assert_allclose(np.diff(joined), dif[:, j], atol=1e-9)
