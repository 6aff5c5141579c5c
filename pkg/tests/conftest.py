import sys
import numpy as np
import pytest
from scipy.signal import lfilter

from sectorfolio import market_data as md


def ar1_series(seed, n=1000, phi=0.5, burn=200):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=n + burn)
    return lfilter([1.0], [1.0, -phi], e)[burn:]


def frame_from_arrays(X, y, names=None, start="2020-01-06"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != len(y):
        X = X.T
    names = names or [f"x{j}" for j in range(X.shape[1])]
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(len(y)), roll="forward")
    return md.FeatureFrame(dates, {n: X[:, j] for j, n in enumerate(names)}, "y", np.asarray(y, dtype=float))


def noisy_sine(seed=42, n=400):
    """Two informative columns and one noise column; returns (train, test) frames."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 2 * np.pi, size=(n, 3))
    y = np.sin(X[:, 0]) + 0.5 * np.cos(2 * X[:, 1]) + rng.normal(0, 0.3, size=n)
    fr = frame_from_arrays(X, y)
    half = n // 2
    return fr.rows(range(0, half)), fr.rows(range(half, n))


@pytest.fixture(scope="session")
def market():
    return md.simulate_ohlcv("IDX", seed=9)


@pytest.fixture(scope="session")
def stock(market):
    return md.simulate_ohlcv("AAA", seed=1, market=market, beta=0.8)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
