"""Mini-batch Adam training with early stopping on validation loss."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..data.samples import SampleSet
from ..errors import DataError, DimensionError, NumericalError
from ..kernel import AdamState, Prng, adam_step, bce_grad, bce_loss, pca_fit
from .graph import ModelGraph, build_model

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 128
    dropout: float = 0.1
    max_epochs: int = 200
    patience: int | None = 20       # None: never stop early
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    sanity: bool = False            # full-batch steps, halve lr and retry on any loss increase

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def __len__(self):
        return len(self.train_loss)

    def rows(self):
        for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss), start=1):
            yield i, tr, va


def model_inputs(model: ModelGraph, samples: SampleSet, split: str, target: str | None = None):
    """``(x, y)`` for ``split``: the input block each architecture consumes.

    CNN variants take whole windows; ``ann`` takes the ten baseline indicators on
    the sample's last day; ``pca-ann`` takes the last day's feature row. In 2D
    mode ``target`` restricts to one market's samples; in 3D mode it selects the
    label column (and the market slice for the baselines).
    """
    if model.arch == "cnnpred3d" and samples.mode != "3d":
        raise DimensionError("cnnpred3d needs a 3D sample set")
    if model.arch == "cnnpred2d" and samples.mode != "2d":
        raise DimensionError("cnnpred2d needs a 2D sample set")
    if samples.mode == "3d" and target is None:
        raise ValueError("3D sample sets need a target market")
    idx = samples.indices(split, target)
    y = samples.target_labels(target)[idx]
    mi = None if samples.mode == "2d" else samples.markets.index(target)
    if model.arch == "cnnpred2d":
        x = samples.x[idx][..., None]
    elif model.arch == "cnnpred3d":
        x = samples.x[idx]
    elif model.arch == "ann":
        if samples.kara is None:
            raise DataError("sample set carries no baseline indicators")
        x = samples.kara[idx] if mi is None else samples.kara[idx, mi]
    else:
        x = samples.x[idx, -1] if mi is None else samples.x[idx, -1, mi]
    return x, y.astype(np.float64)


def new_model(arch: str, samples: SampleSet, cfg: TrainConfig, **arch_args) -> ModelGraph:
    """Build ``arch`` sized for ``samples`` with weights drawn from ``cfg.seed``."""
    rng = Prng(cfg.seed).spawn()
    shape = samples.sample_shape
    if arch == "cnnpred2d":
        return build_model(arch, rng, in_days=shape[0], in_features=shape[1],
                           dropout=cfg.dropout, **arch_args)
    if arch == "cnnpred3d":
        return build_model(arch, rng, in_days=shape[0], markets=shape[1], depth=shape[2],
                           dropout=cfg.dropout, **arch_args)
    if arch == "ann":
        width = samples.kara.shape[-1] if samples.kara is not None else 10
        return build_model(arch, rng, in_size=width, **arch_args)
    return build_model(arch, rng, **arch_args)


def _loss(model, x, y, batch=2048):
    if len(x) == 0:
        return float("nan")
    total = 0.0
    for i in range(0, len(x), batch):
        p = model.forward(x[i:i + batch])
        total += bce_loss(p, y[i:i + batch]) * len(p)
    return total / len(x)


def _check_finite(value, what, epoch):
    if not math.isfinite(value):
        raise NumericalError(f"non-finite {what} ({value}) at epoch {epoch}")


def train_model(model: ModelGraph, samples: SampleSet, cfg: TrainConfig,
                target: str | None = None) -> tuple[ModelGraph, History]:
    """Train in place on the sample set's train split; returns ``(model, history)``."""
    xtr, ytr = model_inputs(model, samples, "train", target)
    xva, yva = model_inputs(model, samples, "val", target)
    return fit_arrays(model, xtr, ytr, xva, yva, cfg)


def fit_arrays(model: ModelGraph, xtr, ytr, xva, yva, cfg: TrainConfig):
    if len(xtr) == 0:
        raise DataError("empty training set")
    if model.arch == "pca-ann":
        model.pca = pca_fit(xtr, model.build_args["components"])
    xtr = model.prepare(xtr)
    xva = model.prepare(xva) if len(xva) else xva
    root = Prng(cfg.seed)
    root.spawn()                      # init stream, consumed by new_model
    shuffle_rng = root.spawn()
    model.set_rng(root.spawn())
    params = model.params()
    adam = AdamState.for_params(params, learning_rate=cfg.learning_rate, beta1=cfg.beta1,
                                beta2=cfg.beta2, epsilon=cfg.epsilon)
    if cfg.sanity:
        return _fit_sanity(model, xtr, ytr, xva, yva, cfg, adam)

    hist = History()
    best = (math.inf, [p.copy() for p in params])
    since_best = 0
    n = len(xtr)
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for i in range(0, n, cfg.batch_size):
            sel = order[i:i + cfg.batch_size]
            p = model.forward(xtr[sel], training=True)
            loss = bce_loss(p, ytr[sel])
            _check_finite(loss, "training loss", epoch)
            total += loss * len(sel)
            model.backward(bce_grad(p, ytr[sel]))
            adam_step(params, model.grads(), adam)
        hist.train_loss.append(total / n)
        val = _loss(model, xva, yva) if len(xva) else total / n
        _check_finite(val, "validation loss", epoch)
        hist.val_loss.append(val)
        if val < best[0]:
            best = (val, [p.copy() for p in params])
            hist.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if cfg.patience is not None and since_best >= cfg.patience:
                hist.stopped_early = True
                break
    model.set_params(best[1])
    logger.info("%s: %d epochs, best epoch %d (val loss %.5f)", model.arch, len(hist),
                hist.best_epoch, best[0])
    return model, hist


def _fit_sanity(model, xtr, ytr, xva, yva, cfg, adam):
    """Full-batch descent that never accepts a step raising the training loss."""
    params = model.params()
    hist = History()
    lr = cfg.learning_rate
    current = _loss(model, xtr, ytr)
    for epoch in range(1, cfg.max_epochs + 1):
        saved = ([p.copy() for p in params], adam.copy())
        p = model.forward(xtr, training=False)
        model.backward(bce_grad(p, ytr))
        adam.learning_rate = lr
        adam_step(params, model.grads(), adam)
        new = _loss(model, xtr, ytr)
        _check_finite(new, "training loss", epoch)
        if new > current:
            model.set_params(saved[0])
            adam = saved[1]
            lr *= 0.5
            new = current
        current = new
        hist.train_loss.append(current)
        hist.val_loss.append(_loss(model, xva, yva) if len(xva) else current)
    hist.best_epoch = len(hist)
    return model, hist
