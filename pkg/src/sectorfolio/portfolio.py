"""Mean-variance statistics, a Monte-Carlo frontier and buy-and-hold backtests."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .market_data import OhlcvSeries, ReturnSeries, to_returns

logger = logging.getLogger(__name__)

TRADING_DAYS = 250
RISK_FREE = 0.01


class PortfolioError(ValueError):
    pass


@dataclass(frozen=True)
class AssetStats:
    symbol: str
    annual_return: float
    annual_risk: float
    daily_mean: float
    daily_std: float

    def to_dict(self):
        return {"symbol": self.symbol, "annual_return": self.annual_return,
                "annual_risk": self.annual_risk, "daily_mean": self.daily_mean,
                "daily_std": self.daily_std}


@dataclass(frozen=True)
class PortfolioWeights:
    weights: Mapping[str, float]

    def __post_init__(self):
        w = {str(k): float(v) for k, v in self.weights.items()}
        if not w:
            raise PortfolioError("portfolio has no assets")
        bad = [k for k, v in w.items() if not math.isfinite(v) or v < 0]
        if bad:
            raise PortfolioError(f"weights must be finite and nonnegative: {bad}")
        total = math.fsum(w.values())
        if abs(total - 1.0) > 1e-9:
            raise PortfolioError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def symbols(self):
        return tuple(self.weights)

    def vector(self, symbols: Sequence[str]) -> np.ndarray:
        if set(symbols) != set(self.weights):
            raise PortfolioError(f"weights cover {sorted(self.weights)}, statistics cover {sorted(symbols)}")
        return np.array([self.weights[s] for s in symbols])

    def to_dict(self):
        return dict(self.weights)


def asset_stats(prices, symbol: str | None = None, mode: str = "arithmetic") -> AssetStats:
    """Annualized return and risk from daily simple returns.

    ``mode="arithmetic"`` scales the mean daily return by 250;
    ``"compound"`` uses ``(1 + mean)^250 - 1``. Risk is always the sample
    standard deviation times sqrt(250).
    """
    if isinstance(prices, OhlcvSeries):
        symbol = symbol or prices.symbol
        prices = prices.close
    r = to_returns(prices).values
    mean = float(r.mean())
    std = float(r.std(ddof=1)) if r.shape[0] > 1 else 0.0
    if mode == "arithmetic":
        annual = mean * TRADING_DAYS
    elif mode == "compound":
        annual = (1.0 + mean) ** TRADING_DAYS - 1.0
    else:
        raise PortfolioError(f"unknown annualization mode {mode!r}")
    return AssetStats(symbol or "", annual, std * math.sqrt(TRADING_DAYS), mean, std)


def _return_matrix(returns):
    if isinstance(returns, Mapping):
        symbols = list(returns)
        cols = [r.values if isinstance(r, ReturnSeries) else np.asarray(r, dtype=np.float64)
                for r in returns.values()]
    else:
        cols = [r.values if isinstance(r, ReturnSeries) else np.asarray(r, dtype=np.float64)
                for r in returns]
        symbols = [str(i) for i in range(len(cols))]
    if not cols:
        raise PortfolioError("no return series")
    lengths = {c.shape[0] for c in cols}
    if len(lengths) != 1:
        raise PortfolioError("return series must have equal length")
    if lengths.pop() < 2:
        raise PortfolioError("need at least 2 returns per series")
    return symbols, np.column_stack(cols)


def covariance_matrix(returns, annualize: bool = True) -> np.ndarray:
    """Sample covariance (n-1 denominator), times 250 when ``annualize``."""
    _, R = _return_matrix(returns)
    cov = np.atleast_2d(np.cov(R, rowvar=False, ddof=1))
    return cov * TRADING_DAYS if annualize else cov


def correlation_matrix(returns):
    """Returns ``(corr, undefined)``.

    Pairs involving a zero-variance asset are NaN and listed in
    ``undefined``.
    """
    symbols, R = _return_matrix(returns)
    cov = np.atleast_2d(np.cov(R, rowvar=False, ddof=1))
    sd = np.sqrt(np.diag(cov))
    k = cov.shape[0]
    corr = np.full((k, k), np.nan)
    undefined = []
    for i in range(k):
        for j in range(k):
            if sd[i] > 0 and sd[j] > 0:
                corr[i, j] = np.clip(cov[i, j] / (sd[i] * sd[j]), -1.0, 1.0)
            elif i <= j:
                undefined.append((symbols[i], symbols[j]))
    for i in range(k):
        if sd[i] > 0:
            corr[i, i] = 1.0
    return corr, tuple(undefined)


def _portfolio_moments(W, mu, cov, risk_free):
    ret = W @ mu
    var = np.einsum("ij,jk,ik->i", W, cov, W)
    risk = np.sqrt(np.maximum(var, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        sharpe = (ret - risk_free) / risk
    return ret, risk, sharpe


def portfolio_stats(weights: PortfolioWeights, stats: Sequence[AssetStats], cov,
                    risk_free: float = RISK_FREE) -> dict:
    symbols = [s.symbol for s in stats]
    w = weights.vector(symbols)
    mu = np.array([s.annual_return for s in stats])
    ret, risk, sharpe = _portfolio_moments(w[None, :], mu, np.asarray(cov, dtype=np.float64), risk_free)
    return {"annual_return": float(ret[0]), "annual_risk": float(risk[0]),
            "sharpe": float(sharpe[0]) if risk[0] > 0 else None}


def equal_weight(symbols: Sequence[str]) -> PortfolioWeights:
    symbols = list(symbols)
    if not symbols:
        raise PortfolioError("need at least one symbol")
    return PortfolioWeights({s: 1.0 / len(symbols) for s in symbols})


@dataclass(frozen=True)
class FrontierResult:
    symbols: tuple
    weights: np.ndarray = field(repr=False)
    annual_return: np.ndarray = field(repr=False)
    annual_risk: np.ndarray = field(repr=False)
    sharpe: np.ndarray = field(repr=False)
    min_variance_index: int
    optimal_index: int
    seed: int
    risk_free: float = RISK_FREE
    resampled: int = 0

    def _pick(self, i):
        return PortfolioWeights(dict(zip(self.symbols, self.weights[i].tolist())))

    @property
    def min_variance(self) -> PortfolioWeights:
        return self._pick(self.min_variance_index)

    @property
    def optimal(self) -> PortfolioWeights:
        return self._pick(self.optimal_index)

    def summary(self, benchmark: PortfolioWeights | None = None, stats=None, cov=None) -> dict:
        def row(i):
            return {"weights": dict(zip(self.symbols, self.weights[i].tolist())),
                    "annual_return": float(self.annual_return[i]),
                    "annual_risk": float(self.annual_risk[i]),
                    "sharpe": float(self.sharpe[i])}
        out = {"symbols": list(self.symbols), "n_samples": int(self.weights.shape[0]),
               "seed": self.seed, "risk_free": self.risk_free, "resampled": self.resampled,
               "min_variance": row(self.min_variance_index), "optimal": row(self.optimal_index)}
        if benchmark is not None and stats is not None and cov is not None:
            out["equal_weight"] = {"weights": benchmark.to_dict(),
                                   **portfolio_stats(benchmark, stats, cov, self.risk_free)}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"w_{s}" for s in self.symbols] + ["annual_return", "annual_risk", "sharpe"])
        for i in range(self.weights.shape[0]):
            w.writerow([repr(float(x)) for x in self.weights[i]]
                       + [repr(float(self.annual_return[i])), repr(float(self.annual_risk[i])),
                          repr(float(self.sharpe[i]))])
        return buf.getvalue()


def sample_frontier(stats: Sequence[AssetStats], cov, n_samples: int = 10000,
                    risk_free: float = RISK_FREE, seed: int = 0, max_rounds: int = 100) -> FrontierResult:
    """Random long-only portfolios from normalized independent uniforms.

    Samples whose risk is zero have no Sharpe ratio; they are redrawn from
    the same stream. The minimum-risk and maximum-Sharpe samples (first on
    ties) are the two reported portfolios.
    """
    stats = list(stats)
    k = len(stats)
    if k == 0:
        raise PortfolioError("need at least one asset")
    if n_samples < 1:
        raise PortfolioError("n_samples must be >= 1")
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if cov.shape != (k, k):
        raise PortfolioError(f"covariance is {cov.shape}, expected {(k, k)}")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
        raise PortfolioError("covariance matrix is not symmetric")
    if np.min(np.linalg.eigvalsh(cov)) < -1e-10 * max(1.0, float(np.max(np.abs(cov)))):
        raise PortfolioError("covariance matrix is not positive semidefinite")
    mu = np.array([s.annual_return for s in stats])
    rng = np.random.default_rng(seed)

    W = np.empty((n_samples, k))
    ret = np.empty(n_samples)
    risk = np.empty(n_samples)
    sharpe = np.empty(n_samples)
    todo = np.arange(n_samples)
    resampled = 0
    for _ in range(max_rounds):
        draw = rng.random((todo.shape[0], k))
        draw /= draw.sum(axis=1, keepdims=True)
        r, s, sh = _portfolio_moments(draw, mu, cov, risk_free)
        W[todo], ret[todo], risk[todo], sharpe[todo] = draw, r, s, sh
        bad = ~(s > 0)
        if not np.any(bad):
            break
        resampled += int(bad.sum())
        todo = todo[bad]
    else:
        raise PortfolioError("covariance is degenerate: could not draw portfolios with positive risk")
    return FrontierResult(tuple(s.symbol for s in stats), W, ret, risk, sharpe,
                          int(np.argmin(risk)), int(np.argmax(sharpe)), seed, risk_free, resampled)


# -------------------------------------------------------------------- backtest

@dataclass(frozen=True)
class BacktestLedger:
    capital: float
    entries: tuple  # dicts with symbol, weight, entry_price, amount, shares, exit_price, exit_value
    final_value: float
    total_return_pct: float
    dates: np.ndarray | None = field(default=None, repr=False)
    daily_values: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        out = {"capital": self.capital, "entries": [dict(e) for e in self.entries],
               "final_value": self.final_value, "total_return_pct": self.total_return_pct}
        if self.daily_values is not None:
            out["daily_values"] = [{"date": str(d), "value": float(v)}
                                   for d, v in zip(self.dates, self.daily_values)]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def backtest(weights: PortfolioWeights | None, entry_prices: Mapping[str, float],
             exit_prices: Mapping[str, float], capital: float = 100000.0,
             daily_closes: Mapping[str, np.ndarray] | None = None, dates=None,
             amounts: Mapping[str, float] | None = None) -> BacktestLedger:
    """Buy at the entry prices, hold, value at the exit prices.

    Either ``weights`` (amount = capital * weight) or explicit ``amounts``
    (capital = their sum) fix the investment. Shares may be fractional.
    With ``daily_closes`` the holding is also valued on every day.
    """
    if amounts is not None:
        amt = {str(k): float(v) for k, v in amounts.items()}
        if any(v < 0 or not math.isfinite(v) for v in amt.values()):
            raise PortfolioError("amounts must be finite and nonnegative")
        capital = math.fsum(amt.values())
        if capital <= 0:
            raise PortfolioError("amounts sum to zero")
        wts = {k: v / capital for k, v in amt.items()}
    elif weights is not None:
        if capital <= 0:
            raise PortfolioError("capital must be positive")
        wts = dict(weights.weights)
        amt = {k: capital * w for k, w in wts.items()}
    else:
        raise PortfolioError("give either weights or amounts")

    entries, shares = [], {}
    for sym in amt:
        if sym not in entry_prices or sym not in exit_prices:
            raise PortfolioError(f"missing entry or exit price for {sym}")
        p0, p1 = float(entry_prices[sym]), float(exit_prices[sym])
        if not (p0 > 0 and p1 > 0):
            raise PortfolioError(f"prices for {sym} must be positive")
        shares[sym] = amt[sym] / p0
        entries.append({"symbol": sym, "weight": wts[sym], "entry_price": p0, "amount": amt[sym],
                        "shares": shares[sym], "exit_price": p1, "exit_value": shares[sym] * p1})
    final = math.fsum(e["exit_value"] for e in entries)
    total = 100.0 * (final - capital) / capital

    values = None
    if daily_closes is not None:
        missing = [s for s in amt if s not in daily_closes]
        if missing:
            raise PortfolioError(f"missing daily closes for {missing}")
        series = [np.asarray(daily_closes[s], dtype=np.float64) * shares[s] for s in amt]
        if len({a.shape[0] for a in series}) != 1:
            raise PortfolioError("daily close series must have equal length")
        values = np.sum(series, axis=0)
        if dates is not None:
            dates = np.asarray(dates, dtype="datetime64[D]")
    return BacktestLedger(capital, tuple(entries), final, total, dates, values)


def realized_stats(daily_values, risk_free: float = RISK_FREE) -> dict:
    """Return over the window plus annualized volatility and Sharpe of a value path.

    ``sharpe`` is None (and ``sharpe_undefined`` True) when the volatility
    is zero.
    """
    v = np.asarray(daily_values, dtype=np.float64)
    r = to_returns(v).values
    std = float(r.std(ddof=1)) if r.shape[0] > 1 else 0.0
    annual_std = std * math.sqrt(TRADING_DAYS)
    annual_ret = float(r.mean()) * TRADING_DAYS
    return {
        "return_pct": 100.0 * (v[-1] / v[0] - 1.0),
        "return_fraction": v[-1] / v[0] - 1.0,
        "annual_return": annual_ret,
        "annual_stdev": annual_std,
        "sharpe": (annual_ret - risk_free) / annual_std if annual_std > 0 else None,
        "sharpe_undefined": not annual_std > 0,
    }
