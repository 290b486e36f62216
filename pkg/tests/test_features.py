import numpy as np
import pytest

from cnnpred.data.features import (
    FEATURE_NAMES,
    MARKET_COLUMNS,
    SHARED_COLUMNS,
    align_calendar,
    build_feature_table,
    build_feature_tables,
    carry_forward,
    load_feature_tables,
    save_feature_tables,
    shared_feature_series,
)
from cnnpred.errors import DataError, IngestionError
from cnnpred.indicators import Series

# Feature rows 1-82 of the published feature table. Rows 35-37 share the label
# "Oil" there (one WTI series, one Brent, one WTI from a second vendor); the
# second and third are suffixed here so column names stay unique.
PUBLISHED_NAMES = """
Day Close Vol MOM-1 MOM-2 MOM-3 ROC-5 ROC-10 ROC-15 ROC-20 EMA-10 EMA-20 EMA-50 EMA-200
DTB4WK DTB3 DTB6 DGS5 DGS10 DAAA DBAA TE1 TE2 TE3 TE5 TE6 DE1 DE2 DE4 DE5 DE6
CTB3M CTB6M CTB1Y Oil Oil-Brent Oil-WTI Gold Gold-F XAU-USD XAG-USD Gas Silver Copper
IXIC GSPC DJI NYSE RUSSELL HSI SSE FCHI FTSE GDAXI
USD-Y USD-GBP USD-CAD USD-CNY USD-AUD USD-NZD USD-CHF USD-EUR USDX
XOM JPM AAPL MSFT GE JNJ WFC AMZN
FCHI-F FTSE-F GDAXI-F HSI-F Nikkei-F KOSPI-F IXIC-F DJI-F S&P-F RUSSELL-F USDX-F
""".split()


def test_published_list_itself_has_82_rows():
    assert len(PUBLISHED_NAMES) == 82


def test_feature_names_match_published_order():
    assert FEATURE_NAMES == tuple(PUBLISHED_NAMES)
    assert len(MARKET_COLUMNS) == 14 and len(SHARED_COLUMNS) == 68


def test_every_market_table_has_82_named_columns(small_tables):
    for t in small_tables.values():
        assert t.names == tuple(PUBLISHED_NAMES)
        assert t.values.shape[1] == 82
        assert not np.isnan(t.values).any()
        assert np.all(t.dates[1:] > t.dates[:-1])


def test_shared_columns_identical_across_markets(small_tables):
    tables = list(small_tables.values())
    common = tables[0].dates
    for t in tables[1:]:
        common = np.intersect1d(common, t.dates)
    blocks = []
    for t in tables:
        rows = np.isin(t.dates, common)
        blocks.append(t.values[rows][:, [t.names.index(c) for c in SHARED_COLUMNS]])
    for b in blocks[1:]:
        assert b.tobytes() == blocks[0].tobytes()


def test_market_return_columns_equal_own_close_returns(small_tables):
    t = small_tables["GSPC"]
    c = t.close
    np.testing.assert_allclose(t.column("GSPC")[1:], c[1:] / c[:-1] - 1.0, rtol=0, atol=1e-14)


def test_carry_forward_uses_last_observation_on_or_before():
    s = Series("s", np.array(["2020-01-02", "2020-01-05"], dtype="datetime64[D]"),
               np.array([1.0, 2.0]))
    target = np.array(["2020-01-01", "2020-01-02", "2020-01-03", "2020-01-06"], dtype="datetime64[D]")
    got = carry_forward(s, target)
    assert np.isnan(got[0])
    assert list(got[1:]) == [1.0, 1.0, 2.0]


def test_align_calendar_drops_leading_undefined_dates(small_raw):
    bars, shared = small_raw
    gspc = bars["GSPC"]
    late = Series("late", gspc.dates[5:], np.arange(len(gspc) - 5, dtype=float))
    dates, cols = align_calendar(gspc, {"late": late})
    assert dates[0] == gspc.dates[5]
    assert not np.isnan(cols["late"]).any()


def test_missing_shared_source_is_reported(small_raw):
    bars, shared = small_raw
    partial = {k: v for k, v in shared.items() if k != "DGS10"}
    with pytest.raises(IngestionError, match="DGS10"):
        build_feature_tables(bars, partial)


def test_too_short_history_is_rejected(small_raw):
    bars, shared = small_raw
    b = bars["DJI"]
    short = type(b)(b.name, b.dates[:50], b.open[:50], b.high[:50], b.low[:50], b.close[:50],
                    b.adj_close[:50], b.volume[:50])
    sources = dict(shared, **{m: x.series("adj_close") for m, x in bars.items()})
    with pytest.raises(DataError):
        build_feature_table(short, sources, 10, shared_feature_series(sources))


def test_feature_tables_round_trip_through_csv(small_tables, tmp_path):
    save_feature_tables(tmp_path, small_tables)
    back = load_feature_tables(tmp_path)
    assert list(back) == list(small_tables)
    for m, t in small_tables.items():
        assert back[m].values.tobytes() == t.values.tobytes()
        assert back[m].close.tobytes() == t.close.tobytes()
        assert back[m].kara.tobytes() == t.kara.tobytes()
