import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnnpred.data.features import FeatureTable
from cnnpred.data.samples import (
    apply_normalizer,
    check_sample_shape,
    chrono_split,
    fit_normalizer,
    load_sample_set,
    save_sample_set,
    window_samples,
)
from cnnpred.errors import CorruptFileError, DataError, DimensionError

# ten closes with two flat days (t=1 -> t=2 and t=6 -> t=7)
FIXTURE_CLOSE = np.array([10.0, 11.0, 11.0, 10.0, 12.0, 12.5, 12.0, 12.0, 13.0, 12.9])
# label_t = 1 iff close[t+1] > close[t], worked out by hand for t = 0..8
FIXTURE_LABELS = [1, 0, 0, 1, 1, 0, 0, 1, 0]


def fixture_table(name="GSPC", close=FIXTURE_CLOSE, seed=0):
    n = len(close)
    rng = np.random.default_rng(seed)
    dates = np.datetime64("2021-03-01") + np.arange(n)
    values = rng.standard_normal((n, 3)) * [1.0, 5.0, 0.1] + [0.0, 100.0, -3.0]
    return FeatureTable(name, dates, ("a", "b", "c"), values, close.copy())


def test_chrono_split_fractions():
    tr, va, te = chrono_split(101)
    assert (len(tr), len(va), len(te)) == (60, 20, 21)
    assert tr.stop == va.start and va.stop == te.start


def test_fixture_labels_including_flat_days():
    s = window_samples({"GSPC": fixture_table()}, "2d", window=1)
    order = np.argsort(s.days)
    assert list(s.labels[order]) == FIXTURE_LABELS


def test_window_rows_are_oldest_first_ending_on_day_t():
    t = fixture_table()
    s = window_samples({"GSPC": t}, "2d", window=3)
    row_of = {d: i for i, d in enumerate(t.dates)}
    last_train = row_of[s.days[s.split["train"].stop - 1]]
    z = apply_normalizer(t, fit_normalizer(t, slice(0, last_train + 1)))
    for i, day in enumerate(s.days):
        r = row_of[day]
        np.testing.assert_array_equal(s.x[i], z.values[r - 2:r + 1])


def test_normalised_training_columns_are_standard():
    t = fixture_table()
    norm = fit_normalizer(t, slice(0, 6))
    z = apply_normalizer(t, norm)
    block = z.values[:6]
    assert np.all(np.abs(block.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(block.std(axis=0) - 1.0) < 1e-9)


def test_training_windows_standardised_on_real_sized_tables(small_tables):
    s = window_samples(small_tables, "2d", window=1)
    for m in s.markets:
        idx = s.indices("train", m)
        block = s.x[idx, 0]
        assert np.all(np.abs(block.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(block.std(axis=0) - 1.0) < 1e-9)


def test_normalising_twice_is_refused():
    z = apply_normalizer(fixture_table(), fit_normalizer(fixture_table(), slice(0, 6)))
    with pytest.raises(DataError):
        fit_normalizer(z, slice(0, 6))
    with pytest.raises(DataError):
        window_samples({"GSPC": z}, "2d", window=2)


def test_constant_training_column_is_dropped():
    t = fixture_table()
    t.values[:, 1] = 7.0
    s = window_samples({"GSPC": t}, "2d", window=2)
    assert s.feature_names == ("a", "c")


@given(st.floats(-1e3, 1e3), st.integers(0, 3))
@settings(max_examples=25, deadline=None)
def test_test_rows_do_not_leak_into_normalisation(shift, col):
    t = fixture_table()
    u = fixture_table()
    u.values[8:, col % 3] += shift
    a = window_samples({"GSPC": t}, "2d", window=2)
    b = window_samples({"GSPC": u}, "2d", window=2)
    idx = a.indices("train")
    np.testing.assert_array_equal(a.x[idx], b.x[idx])


def test_window_longer_than_history_is_rejected():
    with pytest.raises(DataError):
        window_samples({"GSPC": fixture_table()}, "2d", window=20)


def test_2d_pools_markets_in_split_order(small_2d):
    s = small_2d
    assert s.x.shape[1:] == (20, 82)
    for name in ("train", "val", "test"):
        idx = s.indices(name)
        assert set(s.market_index[idx]) == set(range(5))
    assert s.split["train"].stop == s.split["val"].start
    for m in s.markets:
        days = [s.days[s.indices(p, m)] for p in ("train", "val", "test")]
        assert days[0].max() < days[1].min() and days[1].max() < days[2].min()


def test_3d_layout_and_label_matrix(small_3d, small_tables):
    s = small_3d
    assert s.x.shape[1:] == (20, 5, 82)
    assert s.labels.shape == (len(s), 5)
    gspc = small_tables["GSPC"]
    pos = np.searchsorted(gspc.dates, s.days)
    expected = (gspc.close[pos + 1] > gspc.close[pos]).astype(np.uint8)
    np.testing.assert_array_equal(s.target_labels("GSPC"), expected)
    check_sample_shape(s, (20, 5, 82))
    with pytest.raises(DimensionError):
        check_sample_shape(s, (60, 5, 82))


@pytest.mark.parametrize("fixture", ["small_2d", "small_3d"])
def test_binary_round_trip(fixture, request, tmp_path):
    s = request.getfixturevalue(fixture)
    path = tmp_path / "s.cnpd"
    save_sample_set(path, s)
    back = load_sample_set(path)
    assert back.mode == s.mode and back.window == s.window
    assert back.markets == s.markets and back.feature_names == s.feature_names
    assert back.split == s.split
    assert back.x.tobytes() == s.x.tobytes()
    assert back.labels.tobytes() == s.labels.tobytes()
    assert back.kara.tobytes() == s.kara.tobytes()
    assert np.array_equal(back.days, s.days)


def test_corrupt_sample_files(small_2d, tmp_path):
    path = tmp_path / "s.cnpd"
    save_sample_set(path, small_2d)
    raw = path.read_bytes()
    cases = {
        "trunc.cnpd": raw[:-9],
        "magic.cnpd": b"XXXX" + raw[4:],
        "version.cnpd": raw[:4] + (99).to_bytes(4, "little") + raw[8:],
        "trailing.cnpd": raw + b"\0",
    }
    for name, data in cases.items():
        p = tmp_path / name
        p.write_bytes(data)
        with pytest.raises(CorruptFileError):
            load_sample_set(p)
