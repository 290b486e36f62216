"""Multi-seed experiments over the four model families and their report tables."""

from __future__ import annotations

import csv
import io
import logging
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import MODEL_TAGS, RunConfig
from ..data.features import FeatureTable
from ..data.samples import SampleSet, window_samples
from ..errors import DataError
from ..models.graph import ModelGraph
from ..models.train import model_inputs, new_model, train_model
from .metrics import ConfusionCounts, macro_f_counts, welch_t_test

logger = logging.getLogger(__name__)

MEASURES = (
    "Mean of F-measure",
    "Best of F-measure",
    "Standard deviation of F-measure",
    "P-value against 2D-CNNpred",
    "P-value against 3D-CNNpred",
)
P_REFERENCES = ("2D-CNNpred", "3D-CNNpred")
RUN_FIELDS = ("seed", "f_measure", "epochs_trained", "wall_seconds")
SLUGS = {"Technical": "technical", "PCA+ANN": "pca-ann", "2D-CNNpred": "cnnpred2d",
         "3D-CNNpred": "cnnpred3d"}


@dataclass
class SeedResult:
    seed: int
    f_measure: float
    epochs_trained: int
    wall_seconds: float
    val_f: float = float("nan")


@dataclass
class ExperimentReport:
    market: str
    model: str
    runs: list                          # SeedResult, sorted by seed
    p_values: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def f_measures(self) -> list[float]:
        return [r.f_measure for r in self.runs]

    @property
    def mean(self) -> float:
        return float(np.mean(self.f_measures))

    @property
    def best(self) -> float:
        return float(max(self.f_measures))

    @property
    def std_defined(self) -> bool:
        return len(self.runs) > 1

    @property
    def std(self) -> float:
        """Sample standard deviation; 0 (with ``std_defined`` False) for one run."""
        if not self.std_defined:
            return 0.0
        return float(np.std(self.f_measures, ddof=1))


def evaluate(model: ModelGraph, samples: SampleSet, split: str = "test",
             target: str | None = None) -> ConfusionCounts:
    x, y = model_inputs(model, samples, split, target)
    return ConfusionCounts.from_labels(model.predict_label(x), y)


# sample sets handed to worker processes through fork rather than pickling
_SAMPLES: dict = {}


def _fit_and_score(arch, samples, cfg, target, **arch_args):
    start = time.perf_counter()
    model = new_model(arch, samples, cfg, **arch_args)
    model, hist = train_model(model, samples, cfg, target)
    wall = time.perf_counter() - start
    return model, len(hist), wall


def _scores(model, samples, target):
    val = macro_f_counts(evaluate(model, samples, "val", target)) if len(
        samples.indices("val", target)) else float("nan")
    return val, macro_f_counts(evaluate(model, samples, "test", target))


def _run_job(tag: str, seed: int, cfg: RunConfig, pca_k: int | None = None):
    """Train ``tag`` for one seed; returns ``[(market, SeedResult)]``."""
    tcfg = cfg.train_config(seed)
    out = []
    if tag == "2D-CNNpred":
        s = _SAMPLES["2d"]
        model, epochs, wall = _fit_and_score("cnnpred2d", s, tcfg, None, filters=cfg.filters)
        for m in s.markets:
            val, test = _scores(model, s, m)
            out.append((m, SeedResult(seed, test, epochs, wall, val)))
    elif tag == "3D-CNNpred":
        s = _SAMPLES["3d"]
        for m in s.markets:
            model, epochs, wall = _fit_and_score("cnnpred3d", s, tcfg, m, filters=cfg.filters)
            val, test = _scores(model, s, m)
            out.append((m, SeedResult(seed, test, epochs, wall, val)))
    else:
        s = _SAMPLES["2d"]
        arch, kw = ("ann", {"hidden": cfg.hidden}) if tag == "Technical" else \
            ("pca-ann", {"components": pca_k, "hidden": cfg.hidden})
        for m in s.markets:
            model, epochs, wall = _fit_and_score(arch, s, tcfg, m, **kw)
            val, test = _scores(model, s, m)
            out.append((m, SeedResult(seed, test, epochs, wall, val)))
    return tag, seed, pca_k, out


def build_sample_sets(tables: dict[str, FeatureTable], cfg: RunConfig) -> dict[str, SampleSet]:
    missing = [m for m in cfg.markets if m not in tables]
    if missing:
        raise DataError("feature tables missing for market(s): " + ", ".join(missing))
    tables = {m: tables[m] for m in cfg.markets}
    sets = {}
    if any(t in cfg.models for t in ("Technical", "PCA+ANN", "2D-CNNpred")):
        sets["2d"] = window_samples(tables, "2d", cfg.window, cfg.lookback_across_splits)
    if "3D-CNNpred" in cfg.models:
        sets["3d"] = window_samples(tables, "3d", cfg.window, cfg.lookback_across_splits)
    return sets


def run_experiment(samples: dict[str, SampleSet], cfg: RunConfig) -> list[ExperimentReport]:
    """Train every configured model for every seed and aggregate test macro-F per market.

    PCA+ANN is trained for each component count in ``cfg.pca_k``; per market
    the count with the best mean validation macro-F is reported.
    """
    seeds = cfg.seed_list()
    jobs = []
    for tag in (t for t in MODEL_TAGS if t in cfg.models):
        if tag == "PCA+ANN":
            width = samples["2d"].x.shape[-1]
            ks = [k for k in cfg.pca_k if k <= width]
            if len(ks) < len(cfg.pca_k):
                logger.warning("PCA+ANN: dropping component counts above %d features", width)
            if not ks:
                raise DataError(f"no PCA component count fits {width} features")
            jobs += [(tag, s, k) for k in ks for s in seeds]
        else:
            jobs += [(tag, s, None) for s in seeds]

    _SAMPLES.clear()
    _SAMPLES.update(samples)
    if cfg.threads > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=cfg.threads, mp_context=ctx) as pool:
            results = list(pool.map(_run_job, *zip(*[(t, s, cfg, k) for t, s, k in jobs])))
    else:
        results = [_run_job(t, s, cfg, k) for t, s, k in jobs]
    _SAMPLES.clear()

    # group (tag, k) -> market -> runs; order-independent by sorting on seed
    grouped: dict = {}
    for tag, seed, k, rows in results:
        for market, res in rows:
            grouped.setdefault((tag, k), {}).setdefault(market, []).append(res)
    markets = list(next(iter(samples.values())).markets)
    reports = []
    for market in markets:
        for tag in (t for t in MODEL_TAGS if t in cfg.models):
            options = {k: sorted(g[market], key=lambda r: r.seed)
                       for (t, k), g in grouped.items() if t == tag}
            meta = {}
            if tag == "PCA+ANN":
                k = max(sorted(options), key=lambda k: _mean_val(options[k]))
                meta = {"pca_k": k, "val_f_by_k": {str(c): _mean_val(options[c]) for c in sorted(options)}}
            else:
                k = None
            reports.append(ExperimentReport(market, tag, options[k], meta=meta))
    attach_p_values(reports)
    return reports


def _mean_val(runs):
    vals = [r.val_f for r in runs if not math.isnan(r.val_f)]
    return float(np.mean(vals)) if vals else float("-inf")


def attach_p_values(reports: list[ExperimentReport]) -> None:
    """Welch p-values of every model against each CNN variant in the same market."""
    by_market: dict = {}
    for r in reports:
        by_market.setdefault(r.market, {})[r.model] = r
    for models in by_market.values():
        for r in models.values():
            for ref in P_REFERENCES:
                other = models.get(ref)
                if other is None:
                    continue
                if other is r:
                    r.p_values[ref] = 1.0
                elif len(r.runs) >= 2 and len(other.runs) >= 2:
                    r.p_values[ref] = welch_t_test(r.f_measures, other.f_measures)


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


def _cells(report: ExperimentReport | None):
    if report is None:
        return [None] * len(MEASURES)
    return [report.mean, report.best, report.std] + [report.p_values.get(r) for r in P_REFERENCES]


def _group(reports):
    out: dict = {}
    for r in reports:
        out.setdefault(r.market, {})[r.model] = r
    return out


def render_report(reports: list[ExperimentReport], fmt: str = "markdown") -> str:
    """Tables with rows = measures and columns = models, one per market.

    An empty list renders only the header.
    """
    grouped = _group(reports)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["market", "measure", *MODEL_TAGS])
        for market, models in grouped.items():
            cols = [_cells(models.get(t)) for t in MODEL_TAGS]
            for i, measure in enumerate(MEASURES):
                w.writerow([market, measure, *(_fmt(c[i]) for c in cols)])
            w.writerow([market, "Number of runs",
                        *(str(len(models[t].runs)) if t in models else "" for t in MODEL_TAGS)])
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    header = "| Measure \\ Model | " + " | ".join(MODEL_TAGS) + " |\n" + \
        "|---" * (len(MODEL_TAGS) + 1) + "|\n"
    if not grouped:
        return header
    parts = []
    for market, models in grouped.items():
        runs = sorted({len(r.runs) for r in models.values()})
        lines = [f"## {market}", "", f"Runs per model: {', '.join(map(str, runs))}", "", header.rstrip("\n")]
        cols = [_cells(models.get(t)) for t in MODEL_TAGS]
        for i, measure in enumerate(MEASURES):
            cells = []
            for t, c in zip(MODEL_TAGS, cols):
                text = _fmt(c[i]) if c[i] is not None else "n/a"
                if i == 2 and t in models and not models[t].std_defined:
                    text += "*"
                cells.append(text)
            lines.append(f"| {measure} | " + " | ".join(cells) + " |")
        if any(not r.std_defined for r in models.values()):
            lines += ["", "\\* single run: standard deviation undefined, reported as 0."]
        parts.append("\n".join(lines) + "\n")
    return "\n".join(parts)


def parse_report_csv(text: str) -> dict:
    """``{(market, measure, model): float | None}`` from :func:`render_report` CSV."""
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    out = {}
    for row in rows[1:]:
        for tag, cell in zip(header[2:], row[2:]):
            out[(row[0], row[1], tag)] = float(cell) if cell else None
    return out


def write_runs_csv(path, report: ExperimentReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_FIELDS)
        for r in report.runs:
            w.writerow([r.seed, repr(r.f_measure), r.epochs_trained, f"{r.wall_seconds:.3f}"])


def emit_report(reports: list[ExperimentReport], out_dir, formats=("markdown", "csv")) -> list[Path]:
    """Write ``report_<market>.md``/``.csv`` and ``runs_<market>_<model>.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for market, models in _group(reports).items():
        subset = [models[t] for t in MODEL_TAGS if t in models]
        for fmt in formats:
            path = out / f"report_{market}.{'md' if fmt == 'markdown' else 'csv'}"
            path.write_text(render_report(subset, fmt), encoding="utf-8")
            written.append(path)
        for r in subset:
            path = out / f"runs_{market}_{SLUGS[r.model]}.csv"
            write_runs_csv(path, r)
            written.append(path)
    return written
