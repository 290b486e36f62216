"""Time the compiled and numpy kernel backends on the CNN layer shapes.

Also times whole training epochs of both CNN variants under each backend; the
backend is fixed at import, so every epoch run is a child process.

Run: python3 benchmarks/bench_kernels.py [--repeat N] [--epochs N]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cnnpred.kernel import _pykernels
from cnnpred.kernel._backend import BACKENDS

# (name, input [B,H,W,C], filters [K,Fh,Fw,C])
SHAPES = [
    ("2d conv 1x82", (128, 60, 82, 1), (8, 1, 82, 1)),
    ("2d conv 3x1", (128, 60, 1, 8), (8, 3, 1, 8)),
    ("3d conv 1x1", (128, 60, 5, 82), (8, 1, 1, 82)),
    ("3d conv 3x5", (128, 60, 5, 8), (8, 3, 5, 8)),
]


def bench(kernels, x, w, b, repeat):
    pre = kernels.conv_forward(x, w, b)
    g = np.ones_like(pre)
    fwd = min(timeit.repeat(lambda: kernels.conv_forward(x, w, b), number=1, repeat=repeat))
    bwd = min(timeit.repeat(lambda: kernels.conv_backward(x, w, g, True), number=1, repeat=repeat))
    pool = min(timeit.repeat(lambda: kernels.maxpool_forward(pre), number=1, repeat=repeat))
    return fwd, bwd, pool


EPOCH_SCRIPT = """
import sys, time
from cnnpred.data.features import build_feature_tables
from cnnpred.data.samples import window_samples
from cnnpred.data.synthetic import generate_synthetic
from cnnpred.models import TrainConfig, new_model, train_model
bars, shared = generate_synthetic(days=1000, seed=1)
tables = build_feature_tables(bars, shared, 10)
epochs = int(sys.argv[1])
cfg = TrainConfig(max_epochs=epochs, patience=None, seed=1)
for mode, arch, target in (("2d", "cnnpred2d", None), ("3d", "cnnpred3d", "GSPC")):
    s = window_samples(tables, mode, 60)
    m = new_model(arch, s, cfg)
    start = time.perf_counter()
    train_model(m, s, cfg, target)
    print(arch, len(s.indices("train", target)), (time.perf_counter() - start) / epochs)
"""


def bench_epochs(names, epochs):
    print(f"\n{'model':<10} {'backend':<8} {'train samples':>13} {'s / epoch':>10}")
    for name in names:
        env = dict(os.environ, CNNPRED_KERNEL=name)
        out = subprocess.run([sys.executable, "-c", EPOCH_SCRIPT, str(epochs)], env=env,
                             capture_output=True, text=True, check=True).stdout
        for line in out.splitlines():
            arch, n, secs = line.split()
            print(f"{arch:<10} {name:<8} {n:>13} {float(secs):>10.3f}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=3, help="training epochs per model; 0 skips")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    names = [n for n in BACKENDS if BACKENDS[n] is not None]
    if "cython" not in names:
        print("compiled backend not built; timing the numpy backend only")
    print(f"{'shape':<14} {'backend':<8} {'forward ms':>11} {'backward ms':>12} {'pool ms':>9}")
    for label, xs, ws in SHAPES:
        x = rng.standard_normal(xs)
        w = rng.standard_normal(ws)
        b = rng.standard_normal(ws[0])
        ref = _pykernels.conv_forward(x, w, b)
        for name in names:
            k = BACKENDS[name]
            assert np.allclose(k.conv_forward(x, w, b), ref, atol=1e-10)
            fwd, bwd, pool = bench(k, x, w, b, args.repeat)
            print(f"{label:<14} {name:<8} {1e3 * fwd:>11.2f} {1e3 * bwd:>12.2f} {1e3 * pool:>9.2f}")
    if args.epochs > 0:
        bench_epochs(names, args.epochs)


if __name__ == "__main__":
    main()
