"""Technical indicators and series transforms.

Missing values are NaN. Each indicator leaves exactly its warm-up prefix
missing (e.g. the first ``n - 1`` entries of an ``n``-period EMA) and is
defined everywhere after, unless a denominator vanishes, in which case that
single point is missing and a warning is logged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass
class Series:
    name: str
    dates: np.ndarray   # datetime64[D], strictly increasing
    values: np.ndarray  # float64, NaN = missing

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.dates.shape != self.values.shape:
            raise DataError(f"{self.name}: {len(self.dates)} dates but {len(self.values)} values")
        if len(self.dates) > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise DataError(f"{self.name}: dates are not strictly increasing")

    def __len__(self):
        return len(self.values)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def with_values(self, values, name=None) -> "Series":
        return Series(name or self.name, self.dates, values)


@dataclass
class Ohlcv:
    name: str
    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    adj_close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        for col in ("open", "high", "low", "close", "adj_close", "volume"):
            arr = np.asarray(getattr(self, col), dtype=np.float64)
            if arr.shape != self.dates.shape:
                raise DataError(f"{self.name}: column {col} has {arr.size} rows, expected {self.dates.size}")
            setattr(self, col, arr)
        if len(self.dates) > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise DataError(f"{self.name}: dates are not strictly increasing")

    def __len__(self):
        return len(self.dates)

    def series(self, column: str = "adj_close") -> Series:
        return Series(self.name, self.dates, getattr(self, column))


def _ratio(num, den, what):
    out = np.full(num.shape, np.nan)
    ok = den != 0
    np.divide(num, den, out=out, where=ok)
    bad = ~ok & ~np.isnan(den)
    if bad.any():
        logger.warning("%s: zero denominator at %d point(s); marked missing", what, int(bad.sum()))
    return out


def _shift(v, k):
    out = np.full(v.shape, np.nan)
    if k < len(v):
        out[k:] = v[:len(v) - k]
    return out


def _rolling(v, n, fn):
    out = np.full(v.shape, np.nan)
    if len(v) >= n:
        out[n - 1:] = fn(sliding_window_view(v, n), axis=-1)
    return out


# -- array-level kernels ---------------------------------------------------------

def rel_change_values(v):
    prev = _shift(v, 1)
    return _ratio(v - prev, prev, "relative change")


def sma_values(v, n):
    return _rolling(v, n, np.mean)


def ema_values(v, n):
    """TA-Lib style EMA: seeded with the SMA of the first ``n`` values."""
    if n < 1:
        raise ValueError("EMA period must be >= 1")
    v = np.asarray(v, dtype=np.float64)
    out = np.full(v.shape, np.nan)
    valid = np.flatnonzero(~np.isnan(v))
    if valid.size == 0:
        return out
    start = valid[0]
    if len(v) - start < n:
        return out
    alpha = 2.0 / (n + 1)
    acc = v[start:start + n].mean()
    out[start + n - 1] = acc
    for t in range(start + n, len(v)):
        acc = alpha * v[t] + (1.0 - alpha) * acc
        out[t] = acc
    return out


def roc_values(v, n):
    prev = _shift(v, n)
    return _ratio(v, prev, f"ROC-{n}") * 100.0 - 100.0


# -- Series-level operations -------------------------------------------------------

def rel_change(s: Series) -> Series:
    return s.with_values(rel_change_values(s.values))


def ema(close: Series, n: int) -> Series:
    return close.with_values(ema_values(close.values, n), f"EMA-{n}")


def sma(close: Series, n: int) -> Series:
    return close.with_values(sma_values(close.values, n), f"SMA-{n}")


def roc(close: Series, n: int) -> Series:
    return close.with_values(roc_values(close.values, n), f"ROC-{n}")


def mom_lag(close: Series, j: int) -> Series:
    """One-day return observed ``j`` days before ``t``."""
    return close.with_values(_shift(rel_change_values(close.values), j), f"MOM-{j}")


def spread(a: Series, b: Series, name: str | None = None) -> Series:
    """``a - b`` on the dates both series share."""
    common, ia, ib = np.intersect1d(a.dates, b.dates, assume_unique=True, return_indices=True)
    return Series(name or f"{a.name}-{b.name}", common, a.values[ia] - b.values[ib])


def first_diff(s: Series) -> Series:
    return s.with_values(s.values - _shift(s.values, 1))


def day_of_week(dates) -> np.ndarray:
    """0 = Monday ... 6 = Sunday (1970-01-01 was a Thursday)."""
    days = np.asarray(dates, dtype="datetime64[D]").astype(np.int64)
    return ((days + 3) % 7).astype(np.float64)


# -- technical-indicator baseline set ----------------------------------------------

KARA_NAMES = ("SMA", "EMA", "MOM", "%K", "%D", "RSI", "MACD", "%R", "A/D", "CCI")


def rsi_values(close, n):
    """Wilder RSI: SMA seed over the first ``n`` changes, then (prev*(n-1)+x)/n."""
    out = np.full(close.shape, np.nan)
    if len(close) <= n:
        return out
    delta = np.diff(close)
    gain = np.maximum(delta, 0.0)
    loss = np.maximum(-delta, 0.0)
    avg_gain = gain[:n].mean()
    avg_loss = loss[:n].mean()

    def value(g, l):
        total = g + l
        # flat stretch: neither side moves
        return 50.0 if total == 0.0 else 100.0 * g / total

    out[n] = value(avg_gain, avg_loss)
    for t in range(n + 1, len(close)):
        avg_gain = (avg_gain * (n - 1) + gain[t - 1]) / n
        avg_loss = (avg_loss * (n - 1) + loss[t - 1]) / n
        out[t] = value(avg_gain, avg_loss)
    return out


def kara_indicators(bars: Ohlcv, n: int = 10) -> dict[str, Series]:
    """The ten indicators of the shallow-ANN baseline, keyed by ``KARA_NAMES``.

    Uses the unadjusted close so prices stay consistent with high/low.
    """
    close, high, low = bars.close, bars.high, bars.low
    hh = _rolling(high, n, np.max)
    ll = _rolling(low, n, np.min)
    rng = hh - ll
    k = _ratio(100.0 * (close - ll), rng, "%K")
    r = _ratio(-100.0 * (hh - close), rng, "%R")
    tp = (high + low + close) / 3.0
    tp_sma = _rolling(tp, n, np.mean)
    mean_dev = np.full(tp.shape, np.nan)
    if len(tp) >= n:
        win = sliding_window_view(tp, n)
        mean_dev[n - 1:] = np.mean(np.abs(win - tp_sma[n - 1:, None]), axis=-1)
    cci = _ratio(tp - tp_sma, 0.015 * mean_dev, "CCI")
    values = {
        "SMA": sma_values(close, n),
        "EMA": ema_values(close, n),
        "MOM": close - _shift(close, n),
        "%K": k,
        "%D": _rolling(k, 3, np.mean),
        "RSI": rsi_values(close, n),
        "MACD": ema_values(close, 12) - ema_values(close, 26),
        "%R": r,
        "A/D": _ratio(high - _shift(close, 1), high - low, "A/D oscillator"),
        "CCI": cci,
    }
    return {name: Series(name, bars.dates, values[name]) for name in KARA_NAMES}
