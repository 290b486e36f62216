"""``cnnpred`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 numerical
failure. Every error is one stderr line starting ``cnnpred: <kind> error:``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .data.features import MARKETS, build_feature_tables, load_feature_tables, save_feature_tables
from .data.io import discover_dataset
from .data.samples import load_sample_set, save_sample_set, window_samples
from .data.synthetic import PLANTABLE, generate_synthetic, write_dataset
from .errors import CnnpredError, DataError
from .kernel import BACKEND
from .models import ARCHITECTURES, TrainConfig, load_checkpoint, read_checkpoint_header
from .models import new_model, save_checkpoint, train_model

ERROR_KINDS = {1: "usage", 2: "data", 3: "numerical"}


class UsageError(CnnpredError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write_metadata(path, command: str, args: argparse.Namespace, started: float, **extra):
    meta = {
        "command": command,
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)},
        "versions": {"cnnpred": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "kernel_backend": BACKEND,
        "wall_seconds": round(time.perf_counter() - started, 3),
    }
    meta.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _markets(text):
    return tuple(m.strip() for m in text.split(",") if m.strip())


def cmd_gen_data(args, started):
    bars, shared = generate_synthetic(args.markets, args.days, args.seed, args.plant_rule,
                                      args.plant_lag)
    write_dataset(args.out, bars, shared)
    _write_metadata(Path(args.out) / "metadata.json", "gen-data", args, started)
    print(f"wrote {len(bars)} markets and {len(shared)} shared series to {args.out}")


def cmd_features(args, started):
    markets, shared = discover_dataset(args.data)
    tables = build_feature_tables(markets, shared, args.kara_period)
    save_feature_tables(args.out, tables)
    rows = {m: len(t) for m, t in tables.items()}
    _write_metadata(Path(args.out) / "metadata.json", "features", args, started, rows=rows)
    for m, n in rows.items():
        print(f"{m}: {n} rows x {len(tables[m].names)} features")


def cmd_build(args, started):
    tables = load_feature_tables(args.features)
    if args.markets:
        missing = [m for m in args.markets if m not in tables]
        if missing:
            raise DataError("no feature table for market(s): " + ", ".join(missing))
        tables = {m: tables[m] for m in args.markets}
    s = window_samples(tables, args.mode, args.window, not args.no_lookback)
    save_sample_set(args.out, s)
    split = {k: len(r) for k, r in s.split.items()}
    _write_metadata(str(args.out) + ".meta.json", "build", args, started,
                    sample_shape=list(s.sample_shape), samples=len(s), split=split)
    print(f"{args.mode} sample set: {len(s)} samples, shape {tuple(s.sample_shape)}, "
          f"split {split['train']}/{split['val']}/{split['test']}")


def _train_config(args) -> TrainConfig:
    base = load_config(args.config) if args.config else RunConfig()
    cfg = base.with_overrides(batch_size=args.batch_size, dropout=args.dropout,
                              max_epochs=args.epochs, learning_rate=args.lr)
    tc = cfg.train_config(args.seed)
    if args.patience is not None:
        tc.patience = None if args.patience == "none" else int(args.patience)
    return tc, cfg


def cmd_train(args, started):
    samples = load_sample_set(args.dataset)
    tc, run_cfg = _train_config(args)
    arch_args = {}
    if args.model in ("cnnpred2d", "cnnpred3d"):
        arch_args["filters"] = run_cfg.filters
    elif args.model == "ann":
        arch_args["hidden"] = run_cfg.hidden
    else:
        arch_args = {"components": args.pca_k, "hidden": run_cfg.hidden}
    if samples.mode == "3d" and args.target is None:
        raise UsageError("training on a 3D sample set needs --target MARKET")
    if args.target is not None and args.target not in samples.markets:
        raise DataError(f"target {args.target!r} not in sample set markets {', '.join(samples.markets)}")
    model = new_model(args.model, samples, tc, **arch_args)
    model, hist = train_model(model, samples, tc, args.target)
    # run paths stay out of the checkpoint so equal runs give equal bytes
    echo = dict(tc.to_dict(), target=args.target)
    save_checkpoint(model, args.out, echo)
    history = Path(args.history) if args.history else Path(args.out).with_suffix(".history.csv")
    with open(history, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr, va in hist.rows():
            w.writerow([epoch, repr(tr), repr(va)])
    _write_metadata(str(args.out) + ".meta.json", "train", args, started, train_config=echo,
                    epochs=len(hist), best_epoch=hist.best_epoch, stopped_early=hist.stopped_early)
    print(f"{args.model}: {len(hist)} epochs, best epoch {hist.best_epoch}, "
          f"val loss {min(hist.val_loss):.6f}; checkpoint {args.out}")


def cmd_eval(args, started):
    from .evaluation import evaluate, macro_f_counts

    samples = load_sample_set(args.dataset)
    header = read_checkpoint_header(args.ckpt)
    model = load_checkpoint(args.ckpt)
    target = args.target or header.get("train_config", {}).get("target")
    if samples.mode == "3d" and target is None:
        raise UsageError("evaluating on a 3D sample set needs --target MARKET")
    if samples.mode == "2d" and target is None:
        scopes = [("all", None)] + [(m, m) for m in samples.markets]
    else:
        scopes = [(target, target)]
    rows = []
    for label, t in scopes:
        if len(samples.indices(args.split, t)) == 0:
            continue
        c = evaluate(model, samples, args.split, t)
        rows.append([label, args.split, c.total, f"{macro_f_counts(c):.6f}",
                     f"{(c.tp + c.tn) / c.total:.6f}", c.tp, c.fp, c.tn, c.fn])
    if not rows:
        raise DataError(f"split {args.split!r} has no samples")
    fields = ["market", "split", "samples", "macro_f", "accuracy", "tp", "fp", "tn", "fn"]
    out = Path(args.out) if args.out else Path(args.ckpt).with_suffix(".eval.csv")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        w.writerows(rows)
    widths = [max(len(str(r[i])) for r in rows + [fields]) for i in range(len(fields))]
    for r in [fields] + rows:
        print("  ".join(str(v).rjust(wd) for v, wd in zip(r, widths)))
    _write_metadata(str(out) + ".meta.json", "eval", args, started, checkpoint=header)


def cmd_experiment(args, started):
    from .evaluation import build_sample_sets, emit_report, run_experiment

    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = cfg.with_overrides(seeds=args.seeds, threads=args.threads, data=args.data,
                             features=args.features)
    if cfg.data:
        markets, shared = discover_dataset(cfg.data)
        tables = build_feature_tables(markets, shared, cfg.kara_period)
    elif cfg.features:
        tables = load_feature_tables(cfg.features)
    else:
        raise UsageError("experiment needs a data source: set 'data' or 'features' "
                         "in the config or pass --data/--features")
    samples = build_sample_sets(tables, cfg)
    reports = run_experiment(samples, cfg)
    emit_report(reports, args.out, cfg.report_format)
    chosen = {r.market: r.meta["pca_k"] for r in reports if r.model == "PCA+ANN"}
    _write_metadata(Path(args.out) / "metadata.json", "experiment", args, started,
                    config=cfg.to_dict(), seeds=cfg.seed_list(), pca_k_chosen=chosen,
                    p_value_test="Welch two-sample t-test, two-sided")
    for r in reports:
        print(f"{r.market:<8} {r.model:<11} mean {r.mean:.4f}  best {r.best:.4f}  std {r.std:.4f}")


def cmd_gradcheck(args, started):
    from .gradcheck import format_results, run_gradcheck

    results = run_gradcheck(args.cases, args.seed)
    print(format_results(results))
    if args.out:
        _write_metadata(Path(args.out) / "gradcheck.json", "gradcheck", args, started,
                        results=[{"name": r.name, "max_error": r.max_error, "checked": r.checked,
                                  "skipped": r.skipped, "passed": r.passed} for r in results])
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"cnnpred: numerical error: gradient check failed for {', '.join(failed)}",
              file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cnnpred", description="CNN market-direction prediction pipeline.")
    p.add_argument("--version", action="version", version=f"cnnpred {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic raw dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--days", type=int, default=2000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--markets", type=_markets, default=MARKETS)
    g.add_argument("--plant-rule", choices=PLANTABLE, metavar="FEATURE",
                   help="make next-day direction the sign of this column")
    g.add_argument("--plant-lag", type=int, default=0, help="days between driver and label day")
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("features", help="build per-market feature tables")
    f.add_argument("--data", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--kara-period", type=int, default=10)
    f.set_defaults(func=cmd_features)

    b = sub.add_parser("build", help="cut normalised windows into a sample set file")
    b.add_argument("--features", required=True)
    b.add_argument("--mode", choices=("2d", "3d"), required=True)
    b.add_argument("--window", type=int, default=60)
    b.add_argument("--markets", type=_markets)
    b.add_argument("--no-lookback", action="store_true",
                   help="windows may not reach back into an earlier split")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build)

    t = sub.add_parser("train", help="train one model and write a checkpoint")
    t.add_argument("--dataset", required=True)
    t.add_argument("--model", choices=ARCHITECTURES, required=True)
    t.add_argument("--pca-k", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--target", help="market to predict (required for 3D sample sets)")
    t.add_argument("--config")
    t.add_argument("--epochs", type=int)
    t.add_argument("--patience", help="epochs without improvement, or 'none'")
    t.add_argument("--batch-size", type=int)
    t.add_argument("--dropout", type=float)
    t.add_argument("--lr", type=float)
    t.add_argument("--history", help="history CSV path (default: next to the checkpoint)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a sample set split")
    e.add_argument("--dataset", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    e.add_argument("--target")
    e.add_argument("--out", help="CSV path (default: next to the checkpoint)")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("experiment", help="multi-seed comparison of all models")
    x.add_argument("--config")
    x.add_argument("--seeds", type=int)
    x.add_argument("--threads", type=int)
    x.add_argument("--data")
    x.add_argument("--features")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_experiment)

    c = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    c.add_argument("--cases", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", help="directory for a JSON result file")
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="cnnpred: %(levelname)s: %(message)s")
        code = args.func(args, started)
        return 0 if code is None else code
    except CnnpredError as exc:
        code, message = exc.exit_code, str(exc)
    except ValueError as exc:
        code, message = 1, str(exc)
    except OSError as exc:
        code, message = 2, f"{exc.filename or ''}: {exc.strerror or exc}".lstrip(": ")
    print(f"cnnpred: {ERROR_KINDS[code]} error: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
