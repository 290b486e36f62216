"""Labelled sliding-window samples, chronological splits and z-scoring.

A sample for day ``t`` holds feature rows ``t-d+1 .. t`` (oldest first, so the
last row is day ``t``) and label ``1`` iff ``close[t+1] > close[t]``.

Splits are taken over each market's samples in date order: first 60% train,
next 20% validation, rest test. Normalisation statistics come only from the
rows the training windows cover.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CorruptFileError, DataError, DimensionError
from .features import FeatureTable

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


def chrono_split(n: int) -> tuple[range, range, range]:
    if n < 0:
        raise ValueError("sample count must be non-negative")
    n_train = int(np.floor(0.6 * n))
    n_val = int(np.floor(0.2 * n))
    return range(0, n_train), range(n_train, n_train + n_val), range(n_train + n_val, n)


@dataclass
class Normalizer:
    names: tuple
    mean: np.ndarray
    std: np.ndarray
    dropped: tuple = ()


def constant_columns(table: FeatureTable, train_rows) -> list[str]:
    block = table.values[train_rows]
    std = np.nanstd(block, axis=0)
    return [n for n, s in zip(table.names, std) if not s > 0.0]


def fit_normalizer(table: FeatureTable, train_rows, drop=()) -> Normalizer:
    """Per-column mean and population std over ``train_rows``.

    Columns that are constant on the training rows are dropped (with a
    warning) because their z-score is undefined; ``drop`` adds more.
    """
    if table.normalized:
        raise DataError(f"{table.market}: table is already normalized")
    drop = set(drop) | set(constant_columns(table, train_rows))
    if drop:
        logger.warning("%s: dropping constant training column(s): %s",
                       table.market, ", ".join(sorted(drop)))
    keep = [i for i, n in enumerate(table.names) if n not in drop]
    block = table.values[train_rows][:, keep]
    mean = np.nanmean(block, axis=0)
    std = np.nanstd(block, axis=0)
    return Normalizer(tuple(table.names[i] for i in keep), mean, std,
                      tuple(n for n in table.names if n in drop))


def apply_normalizer(table: FeatureTable, norm: Normalizer) -> FeatureTable:
    if table.normalized:
        raise DataError(f"{table.market}: table is already normalized")
    idx = [table.names.index(n) for n in norm.names]
    values = (table.values[:, idx] - norm.mean) / norm.std
    out = FeatureTable(table.market, table.dates, norm.names, values, table.close,
                       table.kara, normalized=True, meta=dict(table.meta))
    return out


def _zscore_train(block, train_rows):
    ref = block[train_rows]
    mean = np.nanmean(ref, axis=0)
    std = np.nanstd(ref, axis=0)
    std = np.where(std > 0, std, 1.0)
    return (block - mean) / std


@dataclass
class SampleSet:
    """Windowed samples for one of the two input layouts.

    ``x`` is ``[n, window, features]`` in 2D mode (markets pooled, one market per
    sample) and ``[n, window, markets, features]`` in 3D mode. ``labels`` is
    ``[n]`` (2D) or ``[n, markets]`` (3D: one label column per target market).
    Samples are ordered train, then validation, then test; ``split`` gives the
    contiguous index range of each.
    """

    mode: str
    window: int
    x: np.ndarray
    labels: np.ndarray
    markets: tuple
    feature_names: tuple
    market_index: np.ndarray   # [n] int16, market of each 2D sample; -1 in 3D mode
    days: np.ndarray           # [n] datetime64[D], day t of each sample
    split: dict                # name -> range
    kara: np.ndarray | None = None  # [n, 10] (2D) or [n, markets, 10] (3D)

    def __len__(self):
        return len(self.labels)

    @property
    def sample_shape(self):
        return self.x.shape[1:]

    def market_pos(self, market: str) -> int:
        if market not in self.markets:
            raise ValueError(f"unknown market {market!r}; sample set holds {', '.join(self.markets)}")
        return self.markets.index(market)

    def indices(self, split: str, market: str | None = None) -> np.ndarray:
        idx = np.arange(self.split[split].start, self.split[split].stop)
        if market is not None and self.mode == "2d":
            idx = idx[self.market_index[idx] == self.market_pos(market)]
        return idx

    def target_labels(self, market: str | None = None) -> np.ndarray:
        """Labels for ``market`` (required in 3D mode)."""
        if self.mode == "2d":
            return self.labels
        if market is None:
            raise ValueError("3D sample sets need a target market")
        return self.labels[:, self.market_pos(market)]


def _sample_days(n_rows, window):
    # t needs t-window+1 >= 0 and a next-day close
    return np.arange(window - 1, n_rows - 1)


def _labels(close, days):
    return (close[days + 1] > close[days]).astype(np.uint8)


def _window_ok(missing_rows, days, window):
    # sample usable iff no missing cell in rows t-window+1..t
    csum = np.concatenate([[0], np.cumsum(missing_rows)])
    return (csum[days + 1] - csum[days + 1 - window]) == 0


def _split_keep(days, window, lookback_across_splits):
    parts = chrono_split(len(days))
    keep = []
    for part in parts:
        sel = np.arange(part.start, part.stop)
        if not lookback_across_splits and len(sel):
            # window must start on or after the split's first sample day
            sel = sel[days[sel] - window + 1 >= days[part.start]]
        keep.append(sel)
    return keep


def window_samples(tables: dict[str, FeatureTable], mode: str = "2d", window: int = 60,
                   lookback_across_splits: bool = True) -> SampleSet:
    """Normalise each market on its training rows and cut labelled windows.

    Takes raw (not yet normalised) feature tables. Columns constant on any
    market's training rows are dropped from all markets so widths agree.
    """
    if mode not in ("2d", "3d"):
        raise ValueError(f"mode must be '2d' or '3d', got {mode!r}")
    if window < 1:
        raise ValueError("window must be >= 1")
    if not tables:
        raise DataError("no feature tables given")
    markets = tuple(tables)
    names = tables[markets[0]].names
    for t in tables.values():
        if t.names != names:
            raise DataError(f"{t.market}: feature columns differ from {markets[0]}")
        if t.normalized:
            raise DataError(f"{t.market}: pass raw tables; normalisation happens here")

    if mode == "3d":
        common = tables[markets[0]].dates
        for t in tables.values():
            common = np.intersect1d(common, t.dates)
        if any(len(t) != len(common) for t in tables.values()):
            logger.warning("3D mode: restricting markets to %d shared dates", len(common))
        tables = {m: t.rows(np.isin(t.dates, common)) for m, t in tables.items()}

    # training rows per market: rows covered by any training window
    layout = {}
    drop = set()
    for m, t in tables.items():
        days = _sample_days(len(t), window)
        if len(days) == 0:
            raise DataError(f"{m}: {len(t)} usable rows is not enough for window {window}")
        train = chrono_split(len(days))[0]
        last_train_row = days[train.stop - 1] if len(train) else window - 1
        rows = slice(0, last_train_row + 1)
        layout[m] = (days, rows)
        drop.update(constant_columns(t, rows))
    norm = {m: apply_normalizer(t, fit_normalizer(t, layout[m][1], drop)) for m, t in tables.items()}
    kept_names = norm[markets[0]].names

    if mode == "2d":
        return _window_2d(norm, layout, markets, kept_names, window, lookback_across_splits)
    return _window_3d(norm, layout, markets, kept_names, window, lookback_across_splits)


def _windows(values, days, window):
    idx = days[:, None] + np.arange(1 - window, 1)[None, :]
    return values[idx]


def _window_2d(norm, layout, markets, names, window, lookback):
    per_split = {s: [] for s in SPLITS}
    for mi, m in enumerate(markets):
        t = norm[m]
        days, train_rows = layout[m]
        missing_rows = (np.isnan(t.values).any(axis=1)
                        | (np.isnan(t.kara).any(axis=1) if t.kara is not None else False))
        ok = _window_ok(missing_rows, days, window)
        kara = None if t.kara is None else _zscore_train(t.kara, train_rows)
        for s, sel in zip(SPLITS, _split_keep(days, window, lookback)):
            sel = sel[ok[sel]]
            d = days[sel]
            per_split[s].append((mi, d, t, kara))
    xs, ys, mk, dd, ks, split = [], [], [], [], [], {}
    pos = 0
    for s in SPLITS:
        start = pos
        for mi, d, t, kara in per_split[s]:
            xs.append(_windows(t.values, d, window))
            ys.append(_labels(t.close, d))
            mk.append(np.full(len(d), mi, dtype=np.int16))
            dd.append(t.dates[d])
            if kara is not None:
                ks.append(kara[d])
            pos += len(d)
        split[s] = range(start, pos)
    F = len(names)
    return SampleSet(
        "2d", window,
        np.concatenate(xs) if xs else np.zeros((0, window, F)),
        np.concatenate(ys), markets, names, np.concatenate(mk), np.concatenate(dd), split,
        np.concatenate(ks) if ks and len(ks) == len(xs) else None,
    )


def _window_3d(norm, layout, markets, names, window, lookback):
    first = norm[markets[0]]
    days, train_rows = layout[markets[0]]
    cube = np.stack([norm[m].values for m in markets], axis=1)   # [rows, M, F]
    missing_rows = np.isnan(cube).any(axis=(1, 2))
    has_kara = all(norm[m].kara is not None for m in markets)
    if has_kara:
        kara = np.stack([_zscore_train(norm[m].kara, train_rows) for m in markets], axis=1)
        missing_rows |= np.isnan(kara).any(axis=(1, 2))
    ok = _window_ok(missing_rows, days, window)
    sel_parts = [sel[ok[sel]] for sel in _split_keep(days, window, lookback)]
    sel = np.concatenate(sel_parts)
    d = days[sel]
    split, pos = {}, 0
    for s, part in zip(SPLITS, sel_parts):
        split[s] = range(pos, pos + len(part))
        pos += len(part)
    labels = np.stack([_labels(norm[m].close, d) for m in markets], axis=1)
    return SampleSet(
        "3d", window, _windows(cube, d, window), labels, markets, names,
        np.full(len(d), -1, dtype=np.int16), first.dates[d], split,
        kara[d] if has_kara else None,
    )


# -- binary format -----------------------------------------------------------------

MAGIC = b"CNPD"
VERSION = 1
_HEAD = struct.Struct("<4sIBIIIII")   # magic, version, mode, window, n, markets, features, kara width


def _put_str(buf: bytearray, s: str):
    raw = s.encode("utf-8")
    buf += struct.pack("<H", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptFileError(f"{self.path}: truncated sample file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        st = struct.Struct(fmt)
        return st.unpack(self.take(st.size))

    def string(self):
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")

    def array(self, dtype, count):
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).copy()


def save_sample_set(path, s: SampleSet) -> None:
    """Write ``s`` in the versioned little-endian ``CNPD`` layout."""
    n = len(s)
    kara_w = 0 if s.kara is None else s.kara.shape[-1]
    buf = bytearray(_HEAD.pack(MAGIC, VERSION, 2 if s.mode == "2d" else 3, s.window, n,
                               len(s.markets), len(s.feature_names), kara_w))
    for m in s.markets:
        _put_str(buf, m)
    for f in s.feature_names:
        _put_str(buf, f)
    for name in SPLITS:
        buf += struct.pack("<II", s.split[name].start, s.split[name].stop)
    buf += s.days.astype("datetime64[D]").astype("<i8").tobytes()
    buf += s.market_index.astype("<i2").tobytes()
    buf += s.labels.astype(np.uint8).tobytes()
    buf += np.ascontiguousarray(s.x, dtype="<f8").tobytes()
    if s.kara is not None:
        buf += np.ascontiguousarray(s.kara, dtype="<f8").tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(bytes(buf))


def load_sample_set(path) -> SampleSet:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: sample file not found")
    r = _Reader(path.read_bytes(), path)
    magic, version, mode, window, n, n_m, n_f, kara_w = r.unpack(_HEAD.format)
    if magic != MAGIC:
        raise CorruptFileError(f"{path}: not a sample file (magic {magic!r})")
    if version != VERSION:
        raise CorruptFileError(f"{path}: unsupported sample format version {version}")
    if mode not in (2, 3):
        raise CorruptFileError(f"{path}: bad mode byte {mode}")
    markets = tuple(r.string() for _ in range(n_m))
    names = tuple(r.string() for _ in range(n_f))
    split = {}
    for name in SPLITS:
        a, b = r.unpack("<II")
        split[name] = range(a, b)
    days = r.array("<i8", n).astype("datetime64[D]")
    market_index = r.array("<i2", n).astype(np.int16)
    if mode == 2:
        labels = r.array(np.uint8, n)
        shape = (n, window, n_f)
        kshape = (n, kara_w)
    else:
        labels = r.array(np.uint8, n * n_m).reshape(n, n_m)
        shape = (n, window, n_m, n_f)
        kshape = (n, n_m, kara_w)
    x = r.array("<f8", int(np.prod(shape))).reshape(shape).astype(np.float64)
    kara = r.array("<f8", int(np.prod(kshape))).reshape(kshape).astype(np.float64) if kara_w else None
    if r.pos != len(r.data):
        raise CorruptFileError(f"{path}: {len(r.data) - r.pos} trailing bytes")
    if split["test"].stop != n:
        raise CorruptFileError(f"{path}: split ranges do not cover {n} samples")
    return SampleSet("2d" if mode == 2 else "3d", window, x, labels, markets, names,
                     market_index, days, split, kara)


def check_sample_shape(s: SampleSet, expected: tuple):
    if tuple(s.sample_shape) != tuple(expected):
        raise DimensionError(f"sample shape {s.sample_shape} != expected {expected}")
