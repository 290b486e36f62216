"""The 82-column daily feature table and calendar alignment.

Columns 1-14 are computed from the market's own bars. Columns 15-82 come from
shared sources (rates, commodities, currencies, other indices, large caps,
futures); they are computed on each source's own calendar and then carried
forward onto the market's trading days, so every market sees the same value
for a shared column on a given date.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, IngestionError
from ..indicators import (
    KARA_NAMES,
    Ohlcv,
    Series,
    day_of_week,
    ema_values,
    first_diff,
    kara_indicators,
    mom_lag,
    rel_change,
    rel_change_values,
    roc_values,
    spread,
)
from .io import read_table_csv, write_table_csv

logger = logging.getLogger(__name__)

MARKETS = ("GSPC", "DJI", "IXIC", "NYSE", "RUSSELL")

RATE_LEVELS = ("DTB4WK", "DTB3", "DTB6", "DGS5", "DGS10", "DAAA", "DBAA")

# name -> (minuend, subtrahend)
SPREADS = {
    "TE1": ("DGS10", "DTB4WK"),
    "TE2": ("DGS10", "DTB3"),
    "TE3": ("DGS10", "DTB6"),
    "TE5": ("DTB3", "DTB4WK"),
    "TE6": ("DTB6", "DTB4WK"),
    "DE1": ("DBAA", "DAAA"),
    "DE2": ("DBAA", "DGS10"),
    "DE4": ("DBAA", "DTB6"),
    "DE5": ("DBAA", "DTB3"),
    "DE6": ("DBAA", "DTB4WK"),
}

# name -> raw constant-maturity yield series whose daily change is the feature
YIELD_CHANGES = {"CTB3M": "DGS3MO", "CTB6M": "DGS6MO", "CTB1Y": "DGS1"}

# relative change (return) of a raw price series with the same name
RETURN_COLUMNS = (
    "Oil", "Oil-Brent", "Oil-WTI", "Gold", "Gold-F", "XAU-USD", "XAG-USD", "Gas",
    "Silver", "Copper",
    "IXIC", "GSPC", "DJI", "NYSE", "RUSSELL", "HSI", "SSE", "FCHI", "FTSE", "GDAXI",
    "USD-Y", "USD-GBP", "USD-CAD", "USD-CNY", "USD-AUD", "USD-NZD", "USD-CHF",
    "USD-EUR", "USDX",
    "XOM", "JPM", "AAPL", "MSFT", "GE", "JNJ", "WFC", "AMZN",
    "FCHI-F", "FTSE-F", "GDAXI-F", "HSI-F", "Nikkei-F", "KOSPI-F", "IXIC-F", "DJI-F",
    "S&P-F", "RUSSELL-F", "USDX-F",
)

MARKET_COLUMNS = (
    "Day", "Close", "Vol", "MOM-1", "MOM-2", "MOM-3", "ROC-5", "ROC-10", "ROC-15",
    "ROC-20", "EMA-10", "EMA-20", "EMA-50", "EMA-200",
)

FEATURE_NAMES = (
    MARKET_COLUMNS + RATE_LEVELS + tuple(SPREADS) + tuple(YIELD_CHANGES) + RETURN_COLUMNS
)
assert len(FEATURE_NAMES) == 82

SHARED_COLUMNS = FEATURE_NAMES[len(MARKET_COLUMNS):]

# every raw shared series a feature build needs
REQUIRED_SOURCES = tuple(
    dict.fromkeys(RATE_LEVELS + tuple(YIELD_CHANGES.values()) + RETURN_COLUMNS)
)


@dataclass
class FeatureTable:
    market: str
    dates: np.ndarray                   # datetime64[D]
    names: tuple                        # column names
    values: np.ndarray                  # [rows, columns], NaN = missing
    close: np.ndarray                   # adjusted close, for labels
    kara: np.ndarray | None = None      # [rows, 10] baseline indicators
    normalized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.dates), len(self.names)):
            raise DataError(f"{self.market}: values shape {self.values.shape} does not match "
                            f"{len(self.dates)} dates x {len(self.names)} columns")
        if len(self.dates) > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise DataError(f"{self.market}: dates not strictly increasing")

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def __len__(self):
        return len(self.dates)

    def column(self, name) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def rows(self, keep) -> "FeatureTable":
        return FeatureTable(self.market, self.dates[keep], self.names, self.values[keep],
                            self.close[keep], None if self.kara is None else self.kara[keep],
                            self.normalized, dict(self.meta))


def carry_forward(s: Series, target_dates) -> np.ndarray:
    """Value of ``s`` on each target date: last defined observation on or before it."""
    ok = ~np.isnan(s.values)
    src_dates, src_vals = s.dates[ok], s.values[ok]
    pos = np.searchsorted(src_dates, np.asarray(target_dates, dtype="datetime64[D]"), side="right") - 1
    out = np.full(len(target_dates), np.nan)
    has = pos >= 0
    out[has] = src_vals[pos[has]]
    return out


def align_calendar(target: Ohlcv, others: dict[str, Series]):
    """Carry every series onto ``target``'s trading days.

    Returns ``(dates, columns)`` where leading dates on which any series is
    still undefined have been dropped.
    """
    cols = {name: carry_forward(s, target.dates) for name, s in others.items()}
    if not cols:
        return target.dates.copy(), cols
    stacked = np.column_stack(list(cols.values()))
    defined = ~np.isnan(stacked).any(axis=1)
    if not defined.any():
        return target.dates[:0], {k: v[:0] for k, v in cols.items()}
    first = int(np.argmax(defined))
    return target.dates[first:], {k: v[first:] for k, v in cols.items()}


def shared_feature_series(shared: dict[str, Series]) -> dict[str, Series]:
    """Columns 15-82 on their native calendars."""
    missing = [name for name in REQUIRED_SOURCES if name not in shared]
    if missing:
        raise IngestionError("missing shared source series: " + ", ".join(missing))
    out = {}
    for name in RATE_LEVELS:
        out[name] = shared[name]
    for name, (a, b) in SPREADS.items():
        out[name] = spread(shared[a], shared[b], name)
    for name, raw in YIELD_CHANGES.items():
        s = first_diff(shared[raw])
        out[name] = Series(name, s.dates, s.values)
    for name in RETURN_COLUMNS:
        out[name] = rel_change(shared[name])
    return out


def shared_sources(markets: dict[str, Ohlcv], shared: dict[str, Series]) -> dict[str, Series]:
    """Shared inputs, filling index-return sources from loaded market bars."""
    merged = dict(shared)
    for name, bars in markets.items():
        merged.setdefault(name, bars.series("adj_close"))
    return merged


def build_feature_table(bars: Ohlcv, shared: dict[str, Series], kara_period: int = 10,
                        shared_columns: dict[str, Series] | None = None) -> FeatureTable:
    """All 82 columns for one market, trimmed to rows where every column is defined.

    ``shared_columns`` may pass precomputed :func:`shared_feature_series` output
    so several markets reuse it.
    """
    if len(bars) == 0:
        raise DataError(f"{bars.name}: no rows")
    if shared_columns is None:
        shared_columns = shared_feature_series(shared)
    close = bars.adj_close
    own = {
        "Day": day_of_week(bars.dates),
        "Close": close,
        "Vol": rel_change_values(bars.volume),
    }
    close_s = bars.series("adj_close")
    for j in (1, 2, 3):
        own[f"MOM-{j}"] = mom_lag(close_s, j).values
    for n in (5, 10, 15, 20):
        own[f"ROC-{n}"] = roc_values(close, n)
    for n in (10, 20, 50, 200):
        own[f"EMA-{n}"] = ema_values(close, n)
    shared_vals = {name: carry_forward(s, bars.dates) for name, s in shared_columns.items()}
    values = np.column_stack([own[n] if n in own else shared_vals[n] for n in FEATURE_NAMES])
    kara = kara_indicators(bars, kara_period)
    kara_vals = np.column_stack([kara[n].values for n in KARA_NAMES])

    # trim the warm-up prefix: first row where every feature and indicator exists
    defined = ~(np.isnan(values).any(axis=1) | np.isnan(kara_vals).any(axis=1))
    if not defined.any():
        raise DataError(f"{bars.name}: no date has all features defined "
                        f"(history of {len(bars)} rows is too short)")
    first = int(np.argmax(defined))
    keep = slice(first, None)
    table = FeatureTable(bars.name, bars.dates[keep], FEATURE_NAMES, values[keep],
                         close[keep].copy(), kara_vals[keep])
    interior = int((~defined[keep]).sum())
    if interior:
        logger.warning("%s: %d row(s) after warm-up have missing cells", bars.name, interior)
    return table


def build_feature_tables(markets: dict[str, Ohlcv], shared: dict[str, Series],
                         kara_period: int = 10) -> dict[str, FeatureTable]:
    sources = shared_sources(markets, shared)
    cols = shared_feature_series(sources)
    return {name: build_feature_table(bars, sources, kara_period, cols)
            for name, bars in order_markets(markets).items()}


def order_markets(mapping: dict) -> dict:
    """Canonical order: the five indices first, then anything else alphabetically."""
    known = [m for m in MARKETS if m in mapping]
    rest = sorted(m for m in mapping if m not in MARKETS)
    return {m: mapping[m] for m in known + rest}


def save_feature_tables(out_dir, tables: dict[str, FeatureTable]) -> None:
    """Write ``<market>.csv`` (feature columns) and ``<market>.kara.csv``.

    The second file carries the adjusted close used for labels followed by the
    baseline indicators.
    """
    out = Path(out_dir)
    for name, t in tables.items():
        write_table_csv(out / f"{name}.csv", t.dates, t.names, t.values)
        aux = t.close[:, None] if t.kara is None else np.column_stack([t.close, t.kara])
        aux_names = ["adj_close"] + ([] if t.kara is None else list(KARA_NAMES))
        write_table_csv(out / f"{name}.kara.csv", t.dates, aux_names, aux)


def load_feature_tables(in_dir) -> dict[str, FeatureTable]:
    root = Path(in_dir)
    if not root.is_dir():
        raise IngestionError(f"{root}: feature directory not found")
    tables = {}
    for f in sorted(root.glob("*.csv")):
        if f.name.endswith(".kara.csv"):
            continue
        dates, names, values = read_table_csv(f)
        aux_path = f.with_name(f.stem + ".kara.csv")
        adates, anames, aux = read_table_csv(aux_path)
        if not np.array_equal(dates, adates) or not anames or anames[0] != "adj_close":
            raise DataError(f"{aux_path}: does not match {f.name}")
        kara = aux[:, 1:] if len(anames) > 1 else None
        tables[f.stem] = FeatureTable(f.stem, dates, tuple(names), values, aux[:, 0].copy(), kara)
    if not tables:
        raise IngestionError(f"{root}: no feature tables found")
    return order_markets(tables)
