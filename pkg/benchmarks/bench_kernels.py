"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each row times one workload under both backends by swapping the attributes
of ``sectorfolio.kernels``, which is how the models look the kernels up.
"""
import argparse
import sys
import timeit

import numpy as np
from scipy.signal import lfilter

from sectorfolio import kernels
from sectorfolio.market_data import FeatureFrame
from sectorfolio.ml_forecasters import cart_fit
from sectorfolio.stat_forecasters import arima_fit, mars_fit

NAMES = ("css_residuals", "best_split_mse", "best_split_gini", "hinge_gain_update",
         "arma_css", "arma_css_minimize")


def use(backend):
    for name in NAMES:
        setattr(kernels, name, getattr(backend, name))


def frame(X, y):
    dates = np.busday_offset(np.datetime64("2020-01-06"), np.arange(len(y)))
    return FeatureFrame(dates, {f"x{j}": X[:, j] for j in range(X.shape[1])}, "y", y)


def workloads():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(2000, 8))
    y = X[:, 0] - 0.5 * X[:, 1] + rng.normal(size=2000)
    rows = np.arange(2000, dtype=np.intp)
    feats = np.arange(8, dtype=np.intp)
    yc = y - y.mean()
    z = lfilter([1.0], [1.0, -0.5], rng.normal(size=1200))[200:]
    Xm = rng.uniform(-1, 1, size=(245, 4))
    ym = np.maximum(0, Xm[:, 0] - 0.2) + 0.5 * np.maximum(0, -Xm[:, 1]) + 0.1 * rng.normal(size=245)
    tree_fr = frame(X[:500], y[:500])
    mars_fr = frame(Xm, ym)
    return [
        ("best_split_mse 2000x8", lambda: kernels.best_split_mse(X, yc, rows, feats)),
        ("css_residuals ARMA(2,2) n=1000",
         lambda: kernels.css_residuals(z, np.array([0.4, 0.1]), np.array([0.2, -0.1]), 0.0, 2)),
        ("arima_fit n=1000", lambda: arima_fit(z, max_p=3, max_q=3)),
        ("cart_fit 500x8", lambda: cart_fit(tree_fr)),
        ("mars_fit 245x4", lambda: mars_fit(mars_fr, max_terms=21, max_degree=2)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1
    cy, py = kernels.BACKENDS["cython"], kernels.BACKENDS["python"]
    print(f"{'workload':34s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for label, fn in workloads():
        times = {}
        for name, backend in (("cython", cy), ("python", py)):
            use(backend)
            number = 1
            times[name] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
        print(f"{label:34s} {1e3 * times['cython']:10.3f} {1e3 * times['python']:10.3f} {times['python'] / times['cython']:7.1f}x")
    use(kernels.get_backend())
    return 0


if __name__ == "__main__":
    sys.exit(main())
