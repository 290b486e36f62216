"""CSV readers and writers for raw market data and feature tables."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from ..errors import DataError, IngestionError
from ..indicators import Ohlcv, Series

logger = logging.getLogger(__name__)

OHLCV_HEADER = ["date", "open", "high", "low", "close", "adj_close", "volume"]
SERIES_HEADER = ["date", "value"]
MISSING_TOKENS = {"", ".", "nan", "NaN", "null"}


def _read_rows(path: Path, header: list[str]):
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip().lower() for h in got] != header:
            raise DataError(f"{path}: header {got!r}, expected {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, row


def _parse_date(text, path, lineno):
    try:
        return np.datetime64(text.strip(), "D")
    except ValueError:
        raise DataError(f"{path}:{lineno}: unparsable date {text!r}") from None


def _check_order(dates, path):
    for i in range(1, len(dates)):
        if dates[i] == dates[i - 1]:
            raise DataError(f"{path}: duplicate date {dates[i]}")
        if dates[i] < dates[i - 1]:
            raise DataError(f"{path}: dates not increasing at {dates[i]}")


def load_ohlcv_csv(path, name: str | None = None) -> Ohlcv:
    path = Path(path)
    dates, cols = [], [[] for _ in range(6)]
    for lineno, row in _read_rows(path, OHLCV_HEADER):
        dates.append(_parse_date(row[0], path, lineno))
        for j, cell in enumerate(row[1:]):
            try:
                cols[j].append(float(cell))
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable {OHLCV_HEADER[j + 1]} {cell!r}") from None
    _check_order(dates, path)
    return Ohlcv(name or path.parent.name, np.array(dates, dtype="datetime64[D]"), *cols)


def load_series_csv(path, name: str | None = None) -> Series:
    """Read a ``date,value`` file. Blank or ``.`` values (FRED style) are skipped."""
    path = Path(path)
    dates, values = [], []
    for lineno, row in _read_rows(path, SERIES_HEADER):
        date = _parse_date(row[0], path, lineno)
        cell = row[1].strip()
        if cell in MISSING_TOKENS:
            continue
        try:
            values.append(float(cell))
        except ValueError:
            raise DataError(f"{path}:{lineno}: unparsable value {cell!r}") from None
        dates.append(date)
    _check_order(dates, path)
    return Series(name or path.stem, np.array(dates, dtype="datetime64[D]"), np.array(values))


def _fmt(x: float) -> str:
    return "" if np.isnan(x) else repr(float(x))


def write_ohlcv_csv(path, bars: Ohlcv) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OHLCV_HEADER)
        for i, d in enumerate(bars.dates):
            w.writerow([str(d)] + [_fmt(getattr(bars, c)[i]) for c in OHLCV_HEADER[1:]])


def write_series_csv(path, s: Series) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for d, v in zip(s.dates, s.values):
            w.writerow([str(d), _fmt(v)])


def write_table_csv(path, dates, names, values) -> None:
    """``date`` plus one column per name; missing cells are left empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *names])
        for d, row in zip(dates, values):
            w.writerow([str(d), *(_fmt(x) for x in row)])


def read_table_csv(path):
    """Inverse of :func:`write_table_csv`: ``(dates, names, values)``."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "date":
            raise DataError(f"{path}: first column must be 'date'")
        names = header[1:]
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            dates.append(_parse_date(row[0], path, lineno))
            try:
                rows.append([np.nan if c == "" else float(c) for c in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable number") from None
    _check_order(dates, path)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return np.array(dates, dtype="datetime64[D]"), names, values


def discover_dataset(root) -> tuple[dict[str, Ohlcv], dict[str, Series]]:
    """Load ``<root>/<market>/ohlcv.csv`` and ``<root>/shared/<name>.csv``."""
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"{root}: data directory not found")
    markets = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir() and p.name != "shared"):
        f = sub / "ohlcv.csv"
        if f.is_file():
            markets[sub.name] = load_ohlcv_csv(f, sub.name)
    if not markets:
        raise IngestionError(f"{root}: no <market>/ohlcv.csv files found")
    shared = {}
    shared_dir = root / "shared"
    if shared_dir.is_dir():
        for f in sorted(shared_dir.glob("*.csv")):
            shared[f.stem] = load_series_csv(f, f.stem)
    logger.info("loaded %d markets and %d shared series from %s", len(markets), len(shared), root)
    return markets, shared
