"""Planted rules the networks can see are learned.

With the driver ten days back it lands inside the part of the window the
convolution/pooling stack covers. Every column but the driver is zeroed so the
few hundred training dates suffice.
"""

import numpy as np

from cnnpred.data.features import FEATURE_NAMES, build_feature_tables
from cnnpred.data.samples import window_samples
from cnnpred.data.synthetic import generate_synthetic
from cnnpred.evaluation import evaluate, macro_f_counts
from cnnpred.models import TrainConfig, new_model, train_model


def test_cnnpred2d_recovers_a_visible_planted_rule():
    bars, shared = generate_synthetic(days=2000, seed=5, plant_rule="Oil", plant_lag=10)
    s = window_samples(build_feature_tables(bars, shared, 10), "2d", 60)
    keep = np.zeros(len(FEATURE_NAMES))
    keep[FEATURE_NAMES.index("Oil")] = 1.0
    s.x *= keep
    cfg = TrainConfig(seed=1, max_epochs=30, learning_rate=3e-3)
    m, h = train_model(new_model("cnnpred2d", s, cfg), s, cfg)
    scores = [macro_f_counts(evaluate(m, s, "test", market)) for market in s.markets]
    assert min(scores) >= 0.9, scores
    assert h.val_loss[h.best_epoch - 1] < 0.5 * h.val_loss[0]
