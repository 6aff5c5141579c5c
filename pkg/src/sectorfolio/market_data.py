"""Daily OHLCV ingestion, weekday calendar alignment and feature frames."""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import logging
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

CSV_HEADER = ("Date", "Open", "High", "Low", "Close", "Volume")

# fixed level sets so dummy columns line up across walk-forward folds
CATEGORICAL_LEVELS = {
    "day_of_week": tuple(range(0, 5)),
    "day_of_month": tuple(range(1, 32)),
    "month": tuple(range(1, 13)),
}


class MarketDataError(Exception):
    """Base class for ingestion and feature errors."""


class ParseError(MarketDataError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class ValidationError(MarketDataError):
    pass


class AlignmentError(MarketDataError):
    pass


class FetchError(MarketDataError):
    def __init__(self, message, status=None):
        self.status = status
        super().__init__(message)


class RetryableFetchError(FetchError):
    """Transport-level failure; the same request may succeed later."""


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class OhlcvSeries:
    """Date-indexed daily bars for one instrument.

    ``dates`` is a ``datetime64[D]`` array; the price columns are float
    arrays of the same length. Arrays are read-only.
    """

    symbol: str
    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        dates = _frozen(self.dates, "datetime64[D]")
        object.__setattr__(self, "dates", dates)
        for name in ("open", "high", "low", "close", "volume"):
            arr = _frozen(getattr(self, name))
            if arr.shape != dates.shape:
                raise ValidationError(f"{name} has length {arr.shape[0]}, expected {dates.shape[0]}")
            object.__setattr__(self, name, arr)
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise ValidationError("dates must be strictly increasing")
        for name in ("open", "high", "low", "close"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ValidationError(f"{name} prices must be finite and positive")
        if not np.all(np.isfinite(self.volume)) or np.any(self.volume < 0):
            raise ValidationError("volume must be finite and nonnegative")

    def __len__(self):
        return int(self.dates.shape[0])

    def __eq__(self, other):
        if not isinstance(other, OhlcvSeries):
            return NotImplemented
        return self.symbol == other.symbol and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("dates", "open", "high", "low", "close", "volume")
        )

    def slice_dates(self, start=None, end=None) -> "OhlcvSeries":
        """Rows with ``start <= date <= end`` (either bound may be None)."""
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "D")
        return self._take(np.flatnonzero(mask))

    def _take(self, idx) -> "OhlcvSeries":
        return OhlcvSeries(
            self.symbol, self.dates[idx], self.open[idx], self.high[idx],
            self.low[idx], self.close[idx], self.volume[idx],
        )


@dataclass(frozen=True, eq=False)
class FeatureFrame:
    """Named predictor columns plus one target, one row per trading day."""

    dates: np.ndarray
    columns: Mapping[str, np.ndarray]
    target_name: str
    target: np.ndarray
    categorical: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        dates = _frozen(self.dates, "datetime64[D]")
        object.__setattr__(self, "dates", dates)
        cols = {}
        for name, values in self.columns.items():
            arr = _frozen(values)
            if arr.shape != dates.shape:
                raise ValueError(f"column {name!r} has length {arr.shape[0]}, expected {dates.shape[0]}")
            cols[name] = arr
        object.__setattr__(self, "columns", cols)
        target = _frozen(self.target)
        if target.shape != dates.shape:
            raise ValueError("target length does not match dates")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "categorical", frozenset(self.categorical))
        unknown = self.categorical - set(cols)
        if unknown:
            raise ValueError(f"categorical columns not present: {sorted(unknown)}")
        for name in self.categorical:
            levels = CATEGORICAL_LEVELS.get(name)
            vals = cols[name]
            if np.any(vals != np.round(vals)):
                raise ValueError(f"categorical column {name!r} must hold integer codes")
            if levels is not None and not np.all(np.isin(vals, levels)):
                raise ValueError(f"categorical column {name!r} has codes outside {levels[0]}..{levels[-1]}")

    def __len__(self):
        return int(self.dates.shape[0])

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def matrix(self, names: Iterable[str] | None = None) -> np.ndarray:
        names = self.names if names is None else list(names)
        if not names:
            return np.empty((len(self), 0))
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise KeyError(f"missing columns: {missing}")
        return np.column_stack([self.columns[n] for n in names])

    def rows(self, idx) -> "FeatureFrame":
        """Subset of rows (slice, range or index array)."""
        if isinstance(idx, range):
            idx = slice(idx.start, idx.stop, idx.step)
        return FeatureFrame(
            self.dates[idx],
            {k: v[idx] for k, v in self.columns.items()},
            self.target_name,
            self.target[idx],
            self.categorical,
        )

    def with_columns(self, updates: Mapping[str, np.ndarray]) -> "FeatureFrame":
        cols = dict(self.columns)
        cols.update(updates)
        return FeatureFrame(self.dates, cols, self.target_name, self.target, self.categorical)

    def dummify(self) -> "FeatureFrame":
        """Replace categorical columns by 0/1 indicators, dropping each first level.

        Levels come from the fixed code ranges, so day-of-week, day-of-month
        and month always expand to 4 + 30 + 11 = 45 columns.
        """
        cols = {}
        for name, values in self.columns.items():
            if name not in self.categorical:
                cols[name] = values
                continue
            levels = CATEGORICAL_LEVELS.get(name) or tuple(sorted(set(values.astype(int).tolist())))
            for level in levels[1:]:
                cols[f"{name}_{level}"] = (values == level).astype(np.float64)
        return FeatureFrame(self.dates, cols, self.target_name, self.target, frozenset())


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    dates: np.ndarray | None
    values: np.ndarray
    kind: str

    def __len__(self):
        return int(self.values.shape[0])


# --------------------------------------------------------------------------- io

def _parse_date(text, row):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"bad date {text!r}", row) from None


def _parse_number(text, column, row):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"bad {column} value {text!r}", row) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite {column} value {text!r}", row)
    return value


def load_ohlcv(source, symbol: str) -> OhlcvSeries:
    """Parse a ``Date,Open,High,Low,Close,Volume`` CSV into a sorted series.

    ``source`` may be bytes, text, a path or a readable file object. Row
    numbers in errors count the header as row 1.
    """
    text = _read_source(source)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}", 1)
    records = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 6:
            raise ParseError(f"expected 6 fields, got {len(row)}", row_no)
        date = _parse_date(row[0], row_no)
        o, h, lo, c, v = (_parse_number(row[i], CSV_HEADER[i], row_no) for i in range(1, 6))
        for name, value in zip(CSV_HEADER[1:5], (o, h, lo, c)):
            if value <= 0:
                raise ValidationError(f"row {row_no}: {name} must be positive, got {value}")
        if v < 0:
            raise ValidationError(f"row {row_no}: Volume must be nonnegative, got {v}")
        records.append((date, o, h, lo, c, v, row_no))
    records.sort(key=lambda r: r[0])
    for prev, cur in zip(records, records[1:]):
        if prev[0] == cur[0]:
            raise ValidationError(f"row {cur[6]}: duplicate date {cur[0].isoformat()}")
    cols = list(zip(*records)) if records else [[] for _ in range(7)]
    return OhlcvSeries(
        symbol,
        np.array(cols[0], dtype="datetime64[D]"),
        cols[1], cols[2], cols[3], cols[4], cols[5],
    )


def _read_source(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8-sig")
    if isinstance(source, os.PathLike):
        return Path(source).read_bytes().decode("utf-8-sig")
    if isinstance(source, str):
        if "\n" in source or source.startswith("Date"):
            return source
        return Path(source).read_bytes().decode("utf-8-sig")
    data = source.read()
    return data.decode("utf-8-sig") if isinstance(data, bytes) else data


def _fmt(x: float) -> str:
    return np.format_float_positional(float(x), trim="-")


def to_csv(series: OhlcvSeries) -> str:
    """Serialise to the canonical CSV form (LF line endings)."""
    lines = [",".join(CSV_HEADER)]
    for i in range(len(series)):
        lines.append(",".join((
            str(series.dates[i]),
            _fmt(series.open[i]), _fmt(series.high[i]), _fmt(series.low[i]),
            _fmt(series.close[i]), _fmt(series.volume[i]),
        )))
    return "\n".join(lines) + "\n"


def write_csv(series: OhlcvSeries, path) -> None:
    Path(path).write_bytes(to_csv(series).encode("utf-8"))


def fetch_remote_ohlcv(endpoint: str, symbol: str, start, end, cache_dir, timeout=30.0) -> OhlcvSeries:
    """GET a CSV from ``endpoint`` and parse it, caching the raw body.

    ``endpoint`` is a template with ``{symbol}``, ``{start}`` and ``{end}``
    placeholders. A cached body for the same (symbol, start, end) is used
    without touching the network.
    """
    start_s, end_s = str(np.datetime64(start, "D")), str(np.datetime64(end, "D"))
    cache_dir = Path(cache_dir)
    key = hashlib.sha256(f"{symbol}|{start_s}|{end_s}".encode()).hexdigest()[:16]
    cache_file = cache_dir / f"{symbol}_{start_s}_{end_s}_{key}.csv"
    if cache_file.exists():
        logger.debug("cache hit for %s", cache_file)
        return load_ohlcv(cache_file.read_bytes(), symbol)
    url = endpoint.format(symbol=symbol, start=start_s, end=end_s)
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            status = resp.status
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise FetchError(f"GET {url} returned HTTP {exc.code}", status=exc.code) from exc
    except (urllib.error.URLError, OSError) as exc:
        raise RetryableFetchError(f"GET {url} failed: {exc}") from exc
    if status != 200:
        raise FetchError(f"GET {url} returned HTTP {status}", status=status)
    series = load_ohlcv(body, symbol)
    cache_dir.mkdir(parents=True, exist_ok=True)
    tmp = cache_file.with_suffix(".tmp")
    tmp.write_bytes(body)
    os.replace(tmp, cache_file)
    return series


# ------------------------------------------------------------------ transforms

def align_weekday_calendar(series: OhlcvSeries) -> OhlcvSeries:
    """Insert every missing Mon-Fri between the first and last date.

    Inserted rows repeat the previous row's values. Weekend rows are dropped.
    """
    if len(series) == 0:
        raise ValueError("cannot align an empty series")
    weekday = np.is_busday(series.dates)
    src = series._take(np.flatnonzero(weekday))
    if len(src) == 0:
        raise ValueError("series has no weekday rows")
    first, last = src.dates[0], src.dates[-1]
    all_days = np.arange(first, last + np.timedelta64(1, "D"), dtype="datetime64[D]")
    all_days = all_days[np.is_busday(all_days)]
    pos = np.searchsorted(src.dates, all_days, side="right") - 1
    return OhlcvSeries(
        series.symbol, all_days, src.open[pos], src.high[pos], src.low[pos],
        src.close[pos], src.volume[pos],
    )


def weekday_codes(dates) -> np.ndarray:
    """Monday=0 ... Friday=4 (Saturday/Sunday give 5/6)."""
    return (np.asarray(dates, dtype="datetime64[D]").astype(np.int64) - 4) % 7


def _calendar_columns(dates):
    days = np.asarray(dates, dtype="datetime64[D]")
    months = days.astype("datetime64[M]")
    month = (months.astype(np.int64) % 12) + 1
    dom = (days - months.astype("datetime64[D]")).astype(np.int64) + 1
    return {
        "day_of_week": weekday_codes(days).astype(np.float64),
        "day_of_month": dom.astype(np.float64),
        "month": month.astype(np.float64),
    }


def _check_aligned(series, market_index):
    if len(series) != len(market_index) or not np.array_equal(series.dates, market_index.dates):
        raise AlignmentError(
            f"{series.symbol} and {market_index.symbol} are not aligned on identical dates"
        )


def derive_regression_features(series: OhlcvSeries, market_index: OhlcvSeries) -> FeatureFrame:
    """Same-day predictors for the close price.

    ``range`` is open minus close.
    """
    _check_aligned(series, market_index)
    cal = _calendar_columns(series.dates)
    columns = {
        "open": series.open,
        "high": series.high,
        "low": series.low,
        "volume": series.volume,
        "day_of_week": cal["day_of_week"],
        "day_of_month": cal["day_of_month"],
        "month": cal["month"],
        "range": series.open - series.close,
        "nifty_close": market_index.close,
    }
    return FeatureFrame(series.dates, columns, "close", series.close,
                        frozenset({"day_of_week", "day_of_month", "month"}))


def _pct(x):
    return 100.0 * (x[1:] - x[:-1]) / x[:-1]


def derive_classification_features(series: OhlcvSeries, market_index: OhlcvSeries) -> FeatureFrame:
    """Day-over-day percentage changes with an up/down close label.

    The label is 1 when the close did not fall. The first row is dropped. A
    zero previous volume gives a volume change of 0.
    """
    _check_aligned(series, market_index)
    if len(series) < 2:
        raise ValueError("need at least 2 rows for percentage changes")
    cal = _calendar_columns(series.dates[1:])
    vol = series.volume
    prev = vol[:-1]
    safe = np.where(prev > 0, prev, 1.0)
    vol_pct = np.where(prev > 0, 100.0 * (vol[1:] - prev) / safe, 0.0)
    close_pct = _pct(series.close)
    columns = {
        "day_of_week": cal["day_of_week"],
        "day_of_month": cal["day_of_month"],
        "month": cal["month"],
        "open_pct": _pct(series.open),
        "high_pct": _pct(series.high),
        "low_pct": _pct(series.low),
        "nifty_pct": _pct(market_index.close),
        "volume_pct": vol_pct,
    }
    label = (close_pct >= 0).astype(np.float64)
    return FeatureFrame(series.dates[1:], columns, "close_label", label,
                        frozenset({"day_of_week", "day_of_month", "month"}))


def close_frame(series: OhlcvSeries) -> FeatureFrame:
    """Frame with the OHLC prices as columns and close as target.

    Enough for univariate and VAR forecasters, which need no market index.
    """
    columns = {"open": series.open, "high": series.high, "low": series.low}
    return FeatureFrame(series.dates, columns, "close", series.close)


def to_returns(prices, kind: str = "simple", dates=None) -> ReturnSeries:
    """Daily simple (``p_t/p_{t-1} - 1``) or log (``ln p_t/p_{t-1}``) returns."""
    p = np.asarray(prices, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("need at least 2 prices")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("prices must be finite and positive")
    ratio = p[1:] / p[:-1]
    if kind == "simple":
        values = ratio - 1.0
    elif kind == "log":
        values = np.log(ratio)
    else:
        raise ValueError(f"unknown return kind {kind!r}")
    d = None if dates is None else np.asarray(dates, dtype="datetime64[D]")[1:]
    return ReturnSeries(d, values, kind)


def simulate_ohlcv(symbol: str, start="2016-01-01", end="2021-08-27", seed: int = 0,
                   start_price: float = 100.0, drift: float = 0.0003, volatility: float = 0.015,
                   market: OhlcvSeries | None = None, beta: float = 0.0) -> OhlcvSeries:
    """Seeded geometric random-walk bars on every weekday in ``[start, end]``.

    With ``market`` the daily log return loads ``beta`` on the market's
    log return. Meant for fixtures and demonstrations, not for research.
    """
    rng = np.random.default_rng(seed)
    first = np.datetime64(start, "D")
    last = np.datetime64(end, "D") + 1
    days = np.arange(first, last, dtype="datetime64[D]")
    days = days[np.is_busday(days)]
    n = days.shape[0]
    if n == 0:
        raise ValueError("date range contains no weekdays")
    shocks = rng.normal(drift, volatility, size=n)
    if market is not None:
        if not np.array_equal(market.dates, days):
            raise AlignmentError("market series must cover the same weekdays")
        mret = np.concatenate(([0.0], np.diff(np.log(market.close))))
        shocks = shocks + beta * mret
    close = start_price * np.exp(np.cumsum(shocks))
    gap = rng.normal(0.0, volatility / 3, size=n)
    open_ = np.concatenate(([start_price], close[:-1])) * np.exp(gap)
    spread = np.abs(rng.normal(0.0, volatility / 2, size=(2, n)))
    high = np.maximum(open_, close) * np.exp(spread[0])
    low = np.minimum(open_, close) * np.exp(-spread[1])
    volume = np.round(rng.lognormal(13.0, 0.4, size=n))
    r = lambda a: np.round(a, 2)  # noqa: E731 - prices are quoted to the paisa
    return OhlcvSeries(symbol, days, r(open_), np.maximum(r(high), r(np.maximum(open_, close))),
                       np.minimum(r(low), r(np.minimum(open_, close))), r(close), volume)
