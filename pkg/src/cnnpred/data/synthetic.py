"""Synthetic stand-in for the multi-source daily dataset.

Markets follow correlated geometric random walks; every shared source the
feature table needs is generated as a level or price series, foreign ones on
a calendar with random holidays so alignment is exercised.

A planted rule makes the next-day direction of every market a deterministic
function of one feature column: ``label_t = 1`` iff that column's value on day
``t - lag`` is positive. Supported columns are the shared return columns (an
exogenous driver) and ``MOM-1``/``MOM-2``/``MOM-3`` (each market's own lagged
return, applied recursively).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..indicators import Ohlcv, Series, rel_change
from ..kernel.prng import Prng
from .features import MARKETS, RATE_LEVELS, RETURN_COLUMNS, YIELD_CHANGES, carry_forward
from .io import write_ohlcv_csv, write_series_csv

FOREIGN = {"HSI", "SSE", "FCHI", "FTSE", "GDAXI", "FCHI-F", "FTSE-F", "GDAXI-F", "HSI-F",
           "Nikkei-F", "KOSPI-F", "Oil-Brent", "Gold"}
RATE_START = {"DTB4WK": 0.4, "DTB3": 0.5, "DTB6": 0.6, "DGS5": 1.8, "DGS10": 2.4,
              "DAAA": 3.9, "DBAA": 4.9, "DGS3MO": 0.5, "DGS6MO": 0.6, "DGS1": 0.8}
MOM_RULES = {"MOM-1": 1, "MOM-2": 2, "MOM-3": 3}
PLANTABLE = tuple(c for c in RETURN_COLUMNS if c not in MARKETS) + tuple(MOM_RULES)


def business_days(start: str, n: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def _holiday_calendar(dates, rng: Prng, rate=0.02):
    keep = rng.uniform_array(len(dates)) >= rate
    keep[0] = True
    return dates[keep]


def _price_walk(rng: Prng, n, vol, start=100.0):
    r = vol * rng.gaussian_array(n)
    r[0] = 0.0
    return start * np.exp(np.cumsum(r))


def _magnitudes(rng: Prng, n, vol):
    # strictly positive step sizes so no day is flat
    return vol * (np.abs(rng.gaussian_array(n)) + 0.05)


def generate_synthetic(markets=MARKETS, days: int = 2000, seed: int = 0,
                       plant_rule: str | None = None, plant_lag: int = 0,
                       start: str = "2010-01-04"):
    """Return ``(markets, shared)``: dicts of :class:`Ohlcv` and :class:`Series`."""
    if days < 2:
        raise ValueError("need at least 2 days")
    if plant_rule is not None and plant_rule not in PLANTABLE:
        raise ValueError(f"cannot plant a rule on {plant_rule!r}; choose from {', '.join(PLANTABLE)}")
    if plant_lag < 0:
        raise ValueError("plant lag must be >= 0")
    rng = Prng(seed)
    dates = business_days(start, days)

    shared: dict[str, Series] = {}
    for name in RATE_LEVELS + tuple(YIELD_CHANGES.values()):
        walk = RATE_START[name] + np.cumsum(0.02 * rng.gaussian_array(days))
        cal = _holiday_calendar(dates, rng, 0.01)
        shared[name] = Series(name, cal, walk[np.isin(dates, cal)])
    for name in RETURN_COLUMNS:
        if name in MARKETS:
            continue
        cal = _holiday_calendar(dates, rng) if name in FOREIGN else dates
        prices = _price_walk(rng, len(cal), 0.012, 50.0 + 100.0 * rng.uniform())
        shared[name] = Series(name, cal, prices)

    factor = 0.008 * rng.gaussian_array(days)
    bars = {}
    driver = None
    if plant_rule is not None and plant_rule not in MOM_RULES:
        driver = carry_forward(rel_change(shared[plant_rule]), dates)
    for m in markets:
        mrng = rng.spawn()
        if plant_rule is None:
            r = factor + 0.006 * mrng.gaussian_array(days)
        else:
            r = _planted_returns(mrng, days, plant_rule, plant_lag, driver)
        r[0] = 0.0
        close = (1000.0 + 2000.0 * mrng.uniform()) * np.exp(np.cumsum(r))
        gap = 0.002 * mrng.gaussian_array(days)
        open_ = np.concatenate([[close[0]], close[:-1]]) * np.exp(gap)
        top = np.maximum(open_, close)
        bot = np.minimum(open_, close)
        high = top * (1.0 + 0.004 * np.abs(mrng.gaussian_array(days)))
        low = bot * (1.0 - 0.004 * np.abs(mrng.gaussian_array(days)))
        volume = np.round(1e9 * np.exp(0.2 * mrng.gaussian_array(days)))
        bars[m] = Ohlcv(m, dates, open_, high, low, close, close.copy(), volume)
    return bars, shared


def _planted_returns(rng: Prng, n, rule, lag, driver):
    """Log returns whose sign on day t+1 is set by the rule evaluated on day t."""
    mag = _magnitudes(rng, n, 0.008)
    free = np.where(rng.uniform_array(n) < 0.5, -1.0, 1.0) * mag
    r = free.copy()
    if rule in MOM_RULES:
        j = MOM_RULES[rule]
        # MOM-j on day s is the simple return of day s-j; sign(exp(x)-1) == sign(x)
        for t in range(j + lag, n - 1):
            r[t + 1] = mag[t + 1] if r[t - lag - j] > 0 else -mag[t + 1]
        return r
    for t in range(lag, n - 1):
        v = driver[t - lag]
        if not np.isnan(v):
            r[t + 1] = mag[t + 1] if v > 0 else -mag[t + 1]
    return r


def write_dataset(root, markets: dict[str, Ohlcv], shared: dict[str, Series]) -> None:
    root = Path(root)
    for name, b in markets.items():
        write_ohlcv_csv(root / name / "ohlcv.csv", b)
    for name, s in shared.items():
        write_series_csv(root / "shared" / f"{name}.csv", s)
