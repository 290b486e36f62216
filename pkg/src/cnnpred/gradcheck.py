"""Finite-difference verification of every layer's backward pass.

Each case draws random shapes, parameters and inputs, reduces the layer
output to a scalar ``sum(out * r)`` with a fixed random ``r`` and compares the
analytic gradient against central differences on a sample of coordinates.
Composed models are checked through the binary cross-entropy loss with
dropout inactive.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .kernel import Conv2D, Dense, Dropout, Flatten, MaxPool2x1, Prng, bce_grad, bce_loss
from .models.graph import build_cnnpred2d, build_cnnpred3d, build_shallow_ann

STEP = 1e-5
TOLERANCE = 1e-4
DENOM_FLOOR = 1e-6
COORDS_PER_TENSOR = 12
MAX_SKIP_FRACTION = 0.01


def relative_error(analytic, numeric) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), DENOM_FLOOR)


@dataclass
class CheckResult:
    name: str
    cases: int
    checked: int            # gradient coordinates compared
    skipped: int            # coordinates on a ReLU/pooling kink
    max_error: float
    seconds: float

    @property
    def passed(self) -> bool:
        # kinks must stay rare or the comparison would be hollow
        return self.max_error < TOLERANCE and self.skipped <= MAX_SKIP_FRACTION * (
            self.checked + self.skipped)


def _coords(rng: Prng, shape, k=COORDS_PER_TENSOR):
    size = int(np.prod(shape))
    flat = rng.permutation(size)[:k]
    return [np.unravel_index(int(i), shape) for i in flat]


def _pattern(layers):
    """Which side of every ReLU and pooling switch the last forward pass was on."""
    parts = []
    for layer in layers:
        if isinstance(layer, (Conv2D, Dense)) and layer.activation == "relu":
            parts.append(np.packbits(layer._pre > 0).tobytes())
        elif isinstance(layer, MaxPool2x1):
            parts.append(layer._idx.offsets.tobytes())
    return b"".join(parts)


def _compare(f, tensor, grad, rng, layers=()):
    """Max relative error over sampled coordinates of ``tensor``; ``f`` recomputes the scalar.

    A coordinate whose +/-STEP perturbation flips a ReLU or pooling switch of
    ``layers`` sits on a kink where central differences are not a valid
    oracle; it is counted in ``skipped`` instead of compared.
    """
    worst, n, skipped = 0.0, 0, 0
    for idx in _coords(rng, tensor.shape):
        orig = tensor[idx]
        f()
        base = _pattern(layers)
        tensor[idx] = orig + STEP
        up = f()
        kink = _pattern(layers) != base
        tensor[idx] = orig - STEP
        down = f()
        kink = kink or _pattern(layers) != base
        tensor[idx] = orig
        if kink:
            skipped += 1
            continue
        worst = max(worst, relative_error(grad[idx], (up - down) / (2 * STEP)))
        n += 1
    return worst, n, skipped


def _check_layer(layer, x, rng: Prng, training=False, reseed=None):
    """Gradients of ``sum(layer(x) * r)`` w.r.t. parameters and input."""
    def run():
        if reseed is not None:
            layer.rng = Prng(reseed)
        return layer.forward(x, training=training)

    out = run()
    r = rng.gaussian_array(out.shape)
    gx = layer.backward(r.copy())
    grads = [g.copy() for g in layer.grads()]

    def f():
        return float(np.sum(run() * r))

    pairs = list(zip(layer.params(), grads))
    if gx is not None:
        pairs.append((x, gx))
    return _merge(_compare(f, t, g, rng, [layer]) for t, g in pairs)


def _merge(parts):
    worst, n, skipped = 0.0, 0, 0
    for e, k, s in parts:
        worst, n, skipped = max(worst, e), n + k, skipped + s
    return worst, n, skipped


def _randomize_bias(layer, rng):
    for p in layer.params()[1:]:
        p[...] = 0.5 * rng.gaussian_array(p.shape)


def _conv_case(rng: Prng):
    fh, fw = 1 + int(rng.uniform() * 3), 1 + int(rng.uniform() * 3)
    cin, cout = 1 + int(rng.uniform() * 4), 1 + int(rng.uniform() * 4)
    h, w, b = fh + int(rng.uniform() * 6), fw + int(rng.uniform() * 6), 1 + int(rng.uniform() * 3)
    act = "relu" if rng.uniform() < 0.5 else "identity"
    layer = Conv2D(fh, fw, cin, cout, act, rng)
    _randomize_bias(layer, rng)
    return _check_layer(layer, rng.gaussian_array((b, h, w, cin)), rng)


def _pool_case(rng: Prng):
    h, w, c, b = 2 + int(rng.uniform() * 9), 1 + int(rng.uniform() * 4), 1 + int(rng.uniform() * 3), \
        1 + int(rng.uniform() * 3)
    return _check_layer(MaxPool2x1(), rng.gaussian_array((b, h, w, c)), rng)


def _dense_case(rng: Prng):
    i, o, b = 1 + int(rng.uniform() * 12), 1 + int(rng.uniform() * 6), 1 + int(rng.uniform() * 4)
    act = ("relu", "sigmoid", "tanh", "identity")[int(rng.uniform() * 4)]
    layer = Dense(i, o, act, rng)
    _randomize_bias(layer, rng)
    return _check_layer(layer, rng.gaussian_array((b, i)), rng)


def _dropout_case(rng: Prng):
    shape = (1 + int(rng.uniform() * 3), 1 + int(rng.uniform() * 8))
    layer = Dropout(0.9 * rng.uniform())
    # the same mask on every evaluation
    return _check_layer(layer, rng.gaussian_array(shape), rng, training=True,
                        reseed=int(rng.next_u64() >> 1))


def _flatten_case(rng: Prng):
    shape = tuple(1 + int(rng.uniform() * 4) for _ in range(4))
    return _check_layer(Flatten(), rng.gaussian_array(shape), rng)


def _bce_case(rng: Prng):
    n = 1 + int(rng.uniform() * 8)
    p = 0.02 + 0.96 * rng.uniform_array(n)
    y = (rng.uniform_array(n) < 0.5).astype(np.float64)
    g = bce_grad(p, y)
    return _compare(lambda: bce_loss(p, y), p, g, rng)


def _model_case(model, x, y, rng: Prng):
    for layer in model.layers:
        if layer.trainable:
            layer.need_input_grad = True
            _randomize_bias(layer, rng)

    def f():
        return bce_loss(model.forward(x), y)

    p = model.forward(x)
    model.backward(bce_grad(p, y))
    grads = [g.copy() for g in model.grads()]
    return _merge(_compare(f, p, g, rng, model.layers) for p, g in zip(model.params(), grads))


def _labels(rng, b):
    return (rng.uniform_array(b) < 0.5).astype(np.float64)


def _cnn2d_case(rng: Prng, full=False):
    days, feats = (60, 82) if full else (12 + int(rng.uniform() * 20), 1 + int(rng.uniform() * 10))
    b = 1 + int(rng.uniform() * 3)
    model = build_cnnpred2d(days, feats, 1 + int(rng.uniform() * 8), dropout=0.0, rng=rng)
    return _model_case(model, rng.gaussian_array((b, days, feats, 1)), _labels(rng, b), rng)


def _cnn3d_case(rng: Prng, full=False):
    days, markets, depth = (60, 5, 82) if full else (
        12 + int(rng.uniform() * 20), 1 + int(rng.uniform() * 5), 1 + int(rng.uniform() * 10))
    b = 1 + int(rng.uniform() * 3)
    model = build_cnnpred3d(days, markets, depth, 1 + int(rng.uniform() * 8), dropout=0.0, rng=rng)
    return _model_case(model, rng.gaussian_array((b, days, markets, depth)), _labels(rng, b), rng)


def _ann_case(rng: Prng):
    i, b = 1 + int(rng.uniform() * 12), 1 + int(rng.uniform() * 4)
    model = build_shallow_ann(i, 1 + int(rng.uniform() * 20), rng)
    return _model_case(model, rng.gaussian_array((b, i)), _labels(rng, b), rng)


CHECKS = {
    "conv2d": _conv_case,
    "maxpool2x1": _pool_case,
    "dense": _dense_case,
    "dropout": _dropout_case,
    "flatten": _flatten_case,
    "bce": _bce_case,
    "cnnpred2d": _cnn2d_case,
    "cnnpred3d": _cnn3d_case,
    "ann": _ann_case,
}


def run_gradcheck(cases: int = 100, seed: int = 0, names=None) -> list[CheckResult]:
    """Run ``cases`` random cases per check; CNN checks include one full-size case."""
    root = Prng(seed)
    results = []
    for name, case in CHECKS.items():
        rng = root.spawn()
        if names is not None and name not in names:
            continue
        start = time.perf_counter()
        full = name in ("cnnpred2d", "cnnpred3d")
        worst, n, skipped = _merge(case(rng, full=True) if full and i == 0 else case(rng)
                                   for i in range(cases))
        results.append(CheckResult(name, cases, n, skipped, worst, time.perf_counter() - start))
    return results


def format_results(results: list[CheckResult]) -> str:
    lines = [f"{'check':<12} {'cases':>5} {'coords':>7} {'kinks':>5} {'max rel err':>12}  result"]
    for r in results:
        lines.append(f"{r.name:<12} {r.cases:>5} {r.checked:>7} {r.skipped:>5} {r.max_error:>12.3e}  "
                     f"{'ok' if r.passed else 'FAIL'}")
    return "\n".join(lines)
