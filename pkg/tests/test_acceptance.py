"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
A criterion that fails is left failing; see the notes in the README.
"""

import time

import numpy as np
import pytest
from scipy import stats

import oracles
from acceptance_log import record
from cnnpred.cli import main
from cnnpred.config import RunConfig
from cnnpred.data.features import SHARED_COLUMNS, build_feature_tables
from cnnpred.data.synthetic import generate_synthetic
from cnnpred.evaluation import build_sample_sets, render_report, run_experiment
from cnnpred.evaluation.metrics import ConfusionCounts, macro_f_counts, welch_t_test
from cnnpred.gradcheck import format_results, run_gradcheck
from cnnpred.indicators import KARA_NAMES, kara_indicators
from cnnpred.kernel import Dense, Prng
from cnnpred.kernel._backend import BACKENDS
from cnnpred.models import TrainConfig, build_cnnpred2d, build_cnnpred3d, fit_arrays
from test_features import PUBLISHED_NAMES
from test_indicators import random_bars, same
from test_samples import FIXTURE_LABELS, fixture_table
from cnnpred.data.samples import apply_normalizer, fit_normalizer, window_samples


def test_criterion_01_flatten_width():
    start = time.perf_counter()
    w2 = build_cnnpred2d(60, 82, 8).flatten_width
    w3 = build_cnnpred3d(60, 5, 82, 8).flatten_width
    secs = time.perf_counter() - start
    ok = w2 == 104 and w3 == 104 and secs < 1.0
    assert record(1, ok, f"flatten widths 2D={w2} 3D={w3} (want 104), {secs:.3f}s")


def test_criterion_02_gradient_check():
    start = time.perf_counter()
    results = run_gradcheck(cases=100, seed=0)
    secs = time.perf_counter() - start
    worst = max(r.max_error for r in results)
    ok = all(r.passed for r in results) and secs < 60
    detail = (f"{len(results)} checks x 100 cases, max rel err {worst:.2e} (< 1e-4), "
              f"{sum(r.skipped for r in results)} kink coords skipped, {secs:.1f}s")
    assert record(2, ok, detail), format_results(results)


def test_criterion_03_kernel_oracles():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst = 0.0
    for kern in BACKENDS.values():
        for _ in range(100):
            fh, fw = rng.integers(1, 4, size=2)
            c, k, nb = rng.integers(1, 5), rng.integers(1, 5), rng.integers(1, 4)
            x = rng.standard_normal((nb, fh + rng.integers(0, 6), fw + rng.integers(0, 6), c))
            w, b = rng.standard_normal((k, fh, fw, c)), rng.standard_normal(k)
            worst = max(worst, np.abs(kern.conv_forward(x, w, b) - oracles.conv2d_valid(x, w, b)).max())
        for _ in range(100):
            x = rng.standard_normal((rng.integers(1, 4), rng.integers(2, 12), rng.integers(1, 5),
                                     rng.integers(1, 5)))
            out, _ = kern.maxpool_forward(x)
            worst = max(worst, np.abs(out - oracles.maxpool_2x1(x)[0]).max())
    for _ in range(100):
        i, o, n = rng.integers(1, 20), rng.integers(1, 8), rng.integers(1, 5)
        d = Dense(int(i), int(o), "identity", Prng(int(rng.integers(1 << 30))))
        d.bias[...] = rng.standard_normal(o)
        x = rng.standard_normal((n, i))
        worst = max(worst, np.abs(d.forward(x) - oracles.dense(x, d.weight, d.bias)).max())
    secs = time.perf_counter() - start
    ok = worst <= 1e-12 and secs < 30
    assert record(3, ok, f"backends {sorted(BACKENDS)}, 100 shapes per kernel, max abs diff "
                         f"{worst:.1e} (<= 1e-12), {secs:.1f}s")


def test_criterion_04_indicator_oracles():
    start = time.perf_counter()
    bad = []
    for seed in range(50):
        bars = random_bars(seed)
        c, h, l = list(bars.close), list(bars.high), list(bars.low)
        got = kara_indicators(bars, 10)
        rng = range(len(c))
        expected = {
            "SMA": [oracles.sma_at(c, t, 10) for t in rng], "EMA": oracles.ema_series(c, 10),
            "MOM": [oracles.mom_at(c, t, 10) for t in rng],
            "%K": [oracles.stoch_k_at(c, h, l, t, 10) for t in rng],
            "%D": [oracles.stoch_d_at(c, h, l, t, 10) for t in rng],
            "RSI": oracles.rsi_series(c, 10), "MACD": oracles.macd_series(c),
            "%R": [oracles.williams_r_at(c, h, l, t, 10) for t in rng],
            "A/D": [oracles.ad_osc_at(c, h, l, t) for t in rng],
            "CCI": [oracles.cci_at(c, h, l, t, 10) for t in rng],
        }
        for name in KARA_NAMES:
            if not all(same(float(a), b) for a, b in zip(got[name].values, expected[name])):
                bad.append((seed, name))
    secs = time.perf_counter() - start
    ok = not bad and secs < 10
    assert record(4, ok, f"{len(KARA_NAMES)} indicators x 50 series of 300 bars, "
                         f"{len(bad)} mismatches at 1e-9, {secs:.1f}s")


def test_criterion_05_feature_set(small_tables):
    names_ok = all(t.names == tuple(PUBLISHED_NAMES) and t.values.shape[1] == 82
                   for t in small_tables.values())
    tables = list(small_tables.values())
    common = tables[0].dates
    for t in tables[1:]:
        common = np.intersect1d(common, t.dates)
    blocks = [t.values[np.isin(t.dates, common)][:, [t.names.index(c) for c in SHARED_COLUMNS]]
              for t in tables]
    shared_ok = all(b.tobytes() == blocks[0].tobytes() for b in blocks[1:])
    ok = names_ok and shared_ok and len(common) > 0
    assert record(5, ok, f"82 published names: {names_ok}; {len(SHARED_COLUMNS)} shared columns "
                         f"bit-identical over {len(common)} common dates: {shared_ok}")


def test_criterion_06_labels_and_normalisation():
    s = window_samples({"GSPC": fixture_table()}, "2d", window=1)
    labels = [int(v) for v in s.labels[np.argsort(s.days)]]
    t = fixture_table()
    z = apply_normalizer(t, fit_normalizer(t, slice(0, 6))).values[:6]
    mean_err = float(np.abs(z.mean(axis=0)).max())
    std_err = float(np.abs(z.std(axis=0) - 1.0).max())
    ok = labels == FIXTURE_LABELS and mean_err < 1e-9 and std_err < 1e-9
    assert record(6, ok, f"fixture labels {labels} (flat days -> 0); |mean| {mean_err:.1e}, "
                         f"|std-1| {std_err:.1e}")


def test_criterion_07_metrics():
    f = macro_f_counts(ConfusionCounts(tp=2, fp=1, tn=2, fn=1))
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        a = rng.normal(0.5, rng.uniform(0.005, 0.1), int(rng.integers(2, 12)))
        b = rng.normal(0.52, rng.uniform(0.005, 0.1), int(rng.integers(2, 12)))
        worst = max(worst, abs(welch_t_test(a, b) - stats.ttest_ind(a, b, equal_var=False).pvalue))
    ok = abs(f - 0.6667) <= 1e-4 and worst < 1e-6
    assert record(7, ok, f"fixture macro-F {f:.6f} (0.6667 +/- 1e-4); Welch vs scipy max diff "
                         f"{worst:.1e} (< 1e-6)")


def test_criterion_08_capacity():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((64, 60, 82, 1))
    y = (rng.random(64) < 0.5).astype(float)
    start = time.perf_counter()
    m = build_cnnpred2d(60, 82, 8, dropout=0.0, rng=Prng(1))
    m, h = fit_arrays(m, x, y, x[:0], y[:0],
                      TrainConfig(dropout=0.0, patience=None, max_epochs=500, seed=1))
    acc = float(np.mean(m.predict_label(x) == y))
    secs = time.perf_counter() - start
    ok = acc >= 0.99 and secs < 120
    assert record(8, ok, f"train accuracy {acc:.3f} on 64 random labels (>= 0.99), {secs:.1f}s")


# planted-signal recovery: next-day direction is the sign of the day's Oil return
PLANT_DAYS, PLANT_SEEDS, PLANT_RULE = 2000, 5, "Oil"


@pytest.mark.slow
def test_criterion_09_planted_signal():
    start = time.perf_counter()
    bars, shared = generate_synthetic(days=PLANT_DAYS, seed=2024, plant_rule=PLANT_RULE, plant_lag=0)
    tables = build_feature_tables(bars, shared, 10)
    cfg = RunConfig(models=("Technical", "2D-CNNpred", "3D-CNNpred"), seeds=PLANT_SEEDS)
    reports = run_experiment(build_sample_sets(tables, cfg), cfg)
    secs = time.perf_counter() - start
    print(render_report(reports))
    means = {}
    for tag in cfg.models:
        means[tag] = {r.market: r.mean for r in reports if r.model == tag}
    cnn_ok = all(v >= 0.95 for tag in ("2D-CNNpred", "3D-CNNpred") for v in means[tag].values())
    order_ok = all(means[tag][m] > means["Technical"][m]
                   for tag in ("2D-CNNpred", "3D-CNNpred") for m in means[tag])
    overall = {tag: float(np.mean(list(v.values()))) for tag, v in means.items()}
    ok = cnn_ok and order_ok and secs < 600
    detail = (f"mean test macro-F over {PLANT_SEEDS} seeds and 5 markets: 2D {overall['2D-CNNpred']:.3f}, "
              f"3D {overall['3D-CNNpred']:.3f}, ANN baseline {overall['Technical']:.3f} "
              f"(CNNs need >= 0.95 per market and above baseline); {secs:.0f}s")
    assert record(9, ok, detail)


def _run_pipeline(root):
    raw, feat, s3 = root / "raw", root / "feat", root / "s3d.bin"
    assert main(["gen-data", "--out", str(raw), "--days", "420", "--seed", "10"]) == 0
    assert main(["features", "--data", str(raw), "--out", str(feat)]) == 0
    assert main(["build", "--features", str(feat), "--mode", "3d", "--window", "20",
                 "--out", str(s3)]) == 0
    assert main(["train", "--dataset", str(s3), "--model", "cnnpred3d", "--target", "GSPC",
                 "--epochs", "5", "--seed", "3", "--out", str(root / "m.cnpw")]) == 0
    cfg = root / "run.cfg"
    cfg.write_text("window = 20\nmax_epochs = 3\nfilters = 4\npca_k = 3,5\nseeds = 2\n")
    assert main(["experiment", "--config", str(cfg), "--features", str(feat),
                 "--out", str(root / "rep")]) == 0
    files = ["m.cnpw", "m.history.csv"] + sorted(
        f"rep/{p.name}" for p in (root / "rep").glob("report_*"))
    return {f: (root / f).read_bytes() for f in files}


def test_criterion_10_determinism(tmp_path):
    a = _run_pipeline(tmp_path / "a")
    b = _run_pipeline(tmp_path / "b")
    diff = [f for f in a if a[f] != b.get(f)]
    ok = not diff and set(a) == set(b) and len(a) == 12
    assert record(10, ok, f"{len(a)} artefacts (checkpoint, history, 10 reports) compared "
                          f"byte for byte across two runs; differing: {diff or 'none'}")
