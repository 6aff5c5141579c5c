"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every line also lands in the terminal summary (see conftest.py), so
``pytest tests/test_acceptance.py`` ends with an eight-line scorecard.
"""
import json
import math
from contextlib import contextmanager
from time import perf_counter

import numpy as np
from conftest import ar1_series, frame_from_arrays, noisy_sine
from test_portfolio import METAL_LEDGER

from sectorfolio import cli
from sectorfolio import econometrics as ec
from sectorfolio import market_data as md
from sectorfolio import portfolio as pf
from sectorfolio import walk_forward as wf
from sectorfolio.ml_forecasters import (
    cart_fit, cart_predict, forest_fit, forest_predict, gbm_fit, knn_fit, knn_predict, logit_fit,
    logit_predict,
)
from sectorfolio.stat_forecasters import arima_fit, mars_fit, mars_predict, ols_fit, ols_predict, var_fit

RESULTS = {}


@contextmanager
def criterion(capsys, number, title, budget=None):
    status, detail = "FAIL", ""
    start = perf_counter()
    try:
        yield
        elapsed = perf_counter() - start
        if budget is not None and elapsed > budget:
            detail = f" over budget of {budget:g} s"
            raise AssertionError(f"criterion {number} took {elapsed:.2f} s, budget {budget:g} s")
        status = "PASS"
    finally:
        elapsed = perf_counter() - start
        line = f"ACCEPTANCE {number} {status}: {title} ({elapsed:.2f} s{detail})"
        RESULTS[number] = line
        with capsys.disabled():
            print("\n" + line)


def _rmse(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def test_1_metal_ledger_replay(capsys):
    with criterion(capsys, 1, "metal ledger replay gives 13.19 Tata Steel shares and 188.95% return", budget=1.0):
        entry = {k: v[0] for k, v in METAL_LEDGER.items()}
        amounts = {k: v[1] for k, v in METAL_LEDGER.items()}
        exit_ = {k: v[2] for k, v in METAL_LEDGER.items()}
        ledger = pf.backtest(None, entry, exit_, amounts=amounts)
        tata = next(e for e in ledger.entries if e["symbol"] == "TATASTEEL")
        assert round(tata["shares"], 2) == 13.19
        assert math.isclose(tata["shares"], 8481.35 / 643.0, rel_tol=1e-12)
        assert abs(ledger.total_return_pct - 188.95) <= 0.1


def test_2_annualization(capsys):
    with criterion(capsys, 2, "annual risk equals daily std times sqrt(250) to 1e-12"):
        rng = np.random.default_rng(2)
        for trial in range(50):
            n = int(rng.integers(5, 1500))
            daily = rng.normal(rng.uniform(-0.002, 0.002), rng.uniform(0.001, 0.05), size=n)
            prices = 100.0 * np.cumprod(1.0 + daily)
            st = pf.asset_stats(prices, "X")
            r = md.to_returns(prices).values
            assert abs(st.annual_risk - float(r.std(ddof=1)) * math.sqrt(250)) <= 1e-12
            assert abs(st.annual_return - float(r.mean()) * 250) <= 1e-12


def test_3_frontier(capsys):
    with criterion(capsys, 3, "frontier at n=10000 seed 42 satisfies weight, risk and Sharpe bounds", budget=5.0):
        rng = np.random.default_rng(42)
        A = rng.normal(size=(5, 5))
        cov = A @ A.T / 5 * 0.05 + 0.01 * np.eye(5)
        mu = rng.uniform(0.0, 0.4, size=5)
        stats = [pf.AssetStats(f"S{i}", float(mu[i]), float(np.sqrt(cov[i, i])), 0.0, 0.0) for i in range(5)]
        res = pf.sample_frontier(stats, cov, n_samples=10000, seed=42)
        assert res.weights.shape == (10000, 5)
        assert np.all(res.weights >= 0)
        assert np.all(np.abs(res.weights.sum(axis=1) - 1.0) <= 1e-9)
        assert np.all(res.annual_risk[res.min_variance_index] <= res.annual_risk)
        assert np.all(res.sharpe[res.optimal_index] >= res.sharpe)

        iid = [pf.AssetStats(s, 0.1, 0.2, 0.0, 0.0) for s in ("A", "B")]
        two = pf.sample_frontier(iid, np.diag([0.04, 0.04]), n_samples=10000, seed=42)
        np.testing.assert_allclose(two.min_variance.vector(["A", "B"]), [0.5, 0.5], atol=0.05)


def test_4_walk_forward(capsys):
    with criterion(capsys, 4, "walk-forward yields 88 folds ending in 13 rows with exact metric recomputation"):
        splits = wf.make_splits(1476, wf.WalkForwardConfig(train_size=245, test_size=14))
        assert len(splits) == 88
        assert len(splits[-1][1]) == 13
        brute, start = [], 245
        while start < 1476:
            brute.append(list(range(start, min(start + 14, 1476))))
            start += 14
        assert [list(te) for _, te in splits] == brute
        covered = sorted(i for _, te in splits for i in te)
        assert covered == list(range(245, 1476))

        flat = frame_from_arrays(np.zeros((400, 1)), np.full(400, 123.45))
        assert wf.evaluate(wf.get_forecaster("persistence"), flat).pooled == 0.0

        market = md.simulate_ohlcv("IDX", seed=9)
        stock = md.simulate_ohlcv("AAA", seed=1, market=market, beta=0.8)
        rep = wf.evaluate(wf.get_forecaster("persistence"), md.close_frame(stock))
        pred, act, _ = rep.pooled_arrays()
        assert abs(rep.pooled - wf.rmse_over_mean(pred, act)) <= 1e-12
        assert abs(rep.mean_per_fold - float(np.mean([f.metric for f in rep.folds]))) <= 1e-12


def test_5_econometrics(capsys):
    with criterion(capsys, 5, "ADF, Durbin-Watson and Granger oracles hold", budget=30.0):
        walk_rejected = noise_accepted = 0
        for seed in range(100):
            e = np.random.default_rng(seed).normal(size=500)
            walk_rejected += not ec.adf_test(np.cumsum(e)).is_stationary_5pct
            noise_accepted += ec.adf_test(e).is_stationary_5pct
        assert walk_rejected >= 95, walk_rejected
        assert noise_accepted >= 99, noise_accepted

        assert ec.durbin_watson([1, -1, 1, -1]) == 3.0

        rng = np.random.default_rng(500)
        x = rng.normal(size=500)
        y = np.empty(500)
        y[0] = rng.normal()
        y[1:] = 0.8 * x[:-1] + rng.normal(size=499)
        g = ec.granger_matrix({"y": y, "x": x, "w": rng.normal(size=500)}, max_lag=2)
        assert np.all(np.diag(g.p_values) == 1.0)
        assert g.p_values[0, 1] < 0.05


def _simulate_var1(A, n, seed):
    rng = np.random.default_rng(seed)
    Z = np.zeros((n + 100, A.shape[0]))
    for t in range(1, n + 100):
        Z[t] = A @ Z[t - 1] + rng.normal(size=A.shape[0])
    return Z[100:]


def test_6_model_recovery(capsys):
    with criterion(capsys, 6, "AR(1), VAR(1), MARS, OLS and stepwise recover planted structure"):
        m = arima_fit(ar1_series(42, n=1000))
        assert m.order[1] == 0 and m.order[0] >= 1
        assert abs(m.ar_coeffs[0] - 0.5) <= 0.1

        A = np.array([[0.5, 0.2], [-0.3, 0.4]])
        Z = _simulate_var1(A, 2000, 42)
        v = var_fit({"a": Z[:, 0], "b": Z[:, 1]}, p_max=5)
        assert v.order == 1
        assert np.max(np.abs(v.coefficient_matrices[0] - A)) <= 0.05

        xs = np.linspace(0, 1, 41)
        hinge = frame_from_arrays(xs[:, None], np.maximum(0.0, xs - 0.5))
        assert _rmse(mars_predict(mars_fit(hinge), hinge), hinge.target) < 1e-8
        flat = mars_fit(frame_from_arrays(np.random.default_rng(0).normal(size=(80, 2)), np.full(80, 4.0)))
        assert flat.basis_terms == ()

        xl = np.linspace(-3, 5, 40)
        lin = frame_from_arrays(xl[:, None], 2 * xl + 1)
        o = ols_fit(lin, stepwise=False)
        assert np.max(np.abs(ols_predict(o, lin) - lin.target)) <= 1e-9

        rng = np.random.default_rng(42)
        xa, noise = rng.normal(size=200), rng.normal(size=200)
        yy = 2 * xa + 1 + rng.normal(0, 0.5, size=200)
        sw = ols_fit(frame_from_arrays(np.column_stack([xa, noise]), yy, ["x", "noise"]))
        assert sw.selected_columns == ("x",)
        assert "noise" in sw.dropped_stepwise


def test_7_ml_properties(capsys):
    with criterion(capsys, 7, "forest, GBM, KNN and logistic behave as promised"):
        train, test = noisy_sine(42)
        tree_err = _rmse(cart_predict(cart_fit(train), test), test.target)
        forest_err = _rmse(forest_predict(forest_fit(train, seed=42), test), test.target)
        assert forest_err <= tree_err

        g = gbm_fit(train, n_stages=100)
        assert np.all(np.diff(g.train_loss) <= 0)

        rng = np.random.default_rng(7)
        X, y = rng.normal(size=(40, 3)), rng.normal(size=40)
        k = knn_fit(frame_from_arrays(X, y), k=40)
        np.testing.assert_allclose(knn_predict(k, rng.normal(size=(6, 3))), y.mean(), rtol=1e-12)

        x = np.concatenate([np.linspace(-3, -0.5, 20), np.linspace(0.5, 3, 20)])
        sep = frame_from_arrays(x[:, None], (x > 0).astype(float))
        lm = logit_fit(sep)
        assert np.mean(logit_predict(lm, sep) == sep.target) == 1.0
        assert not lm.converged


def test_8_cli_determinism(capsys, tmp_path):
    with criterion(capsys, 8, "every CLI command reruns byte-identically, serial and parallel"):
        def config(n_jobs):
            cfg = {
                "symbols": {"AAA": {"simulate": {"seed": 1}}, "BBB": {"simulate": {"seed": 2}}},
                "market_index": {"symbol": "IDX", "simulate": {"seed": 9}},
                "start": "2019-06-03", "end": "2021-08-27",
                "models": ["persistence", "ols", "cart"],
                "walk_forward": {"test_size": 30, "n_jobs": n_jobs},
                "portfolio": {"train_end": "2020-12-31", "test_start": "2021-01-01", "n_samples": 3000},
                "seed": 42, "out": str(tmp_path / "out"),
            }
            path = tmp_path / f"config_{n_jobs}.json"
            path.write_text(json.dumps(cfg))
            return path

        steps = [("ingest",), ("evaluate", "--scheme", "both"), ("frontier",),
                 ("backtest", "--weights", "optimal"), ("backtest", "--weights", "min_var"),
                 ("backtest", "--weights", "equal"), ("report",)]
        snapshots = []
        for n_jobs in (1, 1, 4):
            cfg = config(n_jobs)
            for step in steps:
                assert cli.main([*step, "--config", str(cfg)]) == 0, step
            out = tmp_path / "out"
            snapshots.append({p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()})
        assert len(snapshots[0]) >= 15
        assert snapshots[0] == snapshots[1] == snapshots[2]
