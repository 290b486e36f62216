import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cnnpred.errors import DimensionError
from cnnpred.kernel import Prng, bce_loss
from cnnpred.models import (TrainConfig, build_cnnpred2d, build_cnnpred3d, build_model,
                            build_pca_ann, build_shallow_ann, fit_arrays, model_inputs,
                            new_model, train_model)


def test_cnn2d_layer_shapes_and_flatten_width():
    m = build_cnnpred2d(60, 82, 8)
    heights = [s[0] for s in m.shapes[1:-2]]
    assert heights == [60, 58, 29, 29, 27, 13, 13]
    assert m.shapes[1] == (60, 1, 8)
    assert m.flatten_width == 104


def test_cnn3d_layer_shapes_and_flatten_width():
    m = build_cnnpred3d(60, 5, 82, 8)
    assert m.shapes[1] == (60, 5, 8)
    assert m.shapes[2] == (58, 1, 8)
    assert m.flatten_width == 104


@pytest.mark.parametrize("model,count", [
    (build_cnnpred2d(60, 82, 8), 82 * 8 + 8 + 2 * (3 * 8 * 8 + 8) + 104 + 1),
    (build_cnnpred3d(60, 5, 82, 8), 82 * 8 + 8 + 3 * 5 * 8 * 8 + 8 + 3 * 8 * 8 + 8 + 104 + 1),
    (build_shallow_ann(10, 20), 10 * 20 + 20 + 20 + 1),
])
def test_parameter_counts(model, count):
    assert model.n_params == count
    assert count in (1169, 1937, 241)


@settings(max_examples=25, deadline=None)
@given(days=st.integers(10, 80), feats=st.integers(1, 12), filters=st.integers(1, 6))
def test_flatten_width_law(days, feats, filters):
    m = build_cnnpred2d(days, feats, filters)
    assert m.flatten_width == ((days - 2) // 2 - 2) // 2 * filters
    m3 = build_cnnpred3d(days, 3, feats, filters)
    assert m3.flatten_width == m.flatten_width


def test_too_short_window_is_a_dimension_error():
    with pytest.raises(DimensionError):
        build_cnnpred2d(6, 4, 2)


def test_unknown_architecture():
    with pytest.raises(ValueError, match="unknown architecture"):
        build_model("lstm")


def test_wrong_input_shape_rejected():
    m = build_cnnpred2d(20, 5, 2)
    with pytest.raises(DimensionError):
        m.forward(np.zeros((1, 20, 6, 1)))


def test_same_seed_same_weights():
    a = build_cnnpred3d(20, 5, 7, 4, rng=Prng(3))
    b = build_cnnpred3d(20, 5, 7, 4, rng=Prng(3))
    c = build_cnnpred3d(20, 5, 7, 4, rng=Prng(4))
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
    assert not all(np.array_equal(p, q) for p, q in zip(a.params(), c.params()))


def test_glorot_bounds():
    m = build_cnnpred2d(60, 82, 8, rng=Prng(9))
    w = m.layers[0].params()[0]
    limit = np.sqrt(6.0 / (82 + 82 * 8))
    assert np.all(np.abs(w) <= limit)
    assert np.abs(w).max() > 0.8 * limit
    assert np.all(m.layers[0].params()[1] == 0)


def test_tie_probability_maps_to_up():
    m = build_shallow_ann(3, 4)
    for p in m.params():
        p[...] = 0.0                    # sigmoid(0) = 0.5 exactly
    assert np.all(m.predict_label(np.ones((4, 3))) == 1)


def test_dropout_inactive_at_inference(rng):
    m = build_cnnpred2d(20, 6, 4, dropout=0.5, rng=Prng(1))
    x = rng.normal(size=(5, 20, 6, 1))
    p1 = m.forward(x)
    p2 = m.forward(x)
    assert np.array_equal(p1, p2)
    m.set_rng(Prng(2))
    assert not np.array_equal(m.forward(x, training=True), m.forward(x, training=True))


@pytest.mark.parametrize("builder", [
    lambda: build_cnnpred2d(60, 82, 8, dropout=0.0, rng=Prng(5)),
    lambda: build_cnnpred3d(60, 5, 82, 8, dropout=0.0, rng=Prng(5)),
])
def test_last_two_window_rows_never_reach_the_output(builder, rng):
    # valid 3-row convs then 2x1 pools with the odd row dropped: 58 -> 29 -> 27 -> 13
    m = builder()
    for layer in m.layers:
        for p in layer.params()[1:]:
            p[...] = rng.normal(size=p.shape)
    x = rng.normal(size=(4,) + m.input_shape)
    base = m.forward(x)
    y = x.copy()
    y[:, 58:] = rng.normal(size=y[:, 58:].shape) * 100
    assert np.array_equal(m.forward(y), base)
    z = x.copy()
    z[:, 57] += 1.0
    assert not np.array_equal(m.forward(z), base)


def test_pca_ann_projects_before_the_network(small_2d):
    cfg = TrainConfig(max_epochs=2, seed=1)
    m = new_model("pca-ann", small_2d, cfg, components=4, hidden=5)
    with pytest.raises(ValueError, match="PCA"):
        m.predict_proba(np.zeros((1, 82)))
    train_model(m, small_2d, cfg, "GSPC")
    assert m.pca.components.shape == (4, 82)
    x, _ = model_inputs(m, small_2d, "test", "GSPC")
    assert m.predict_proba(x).shape == (len(x),)


def test_pca_with_every_component_keeps_distances(small_2d):
    cfg = TrainConfig(max_epochs=1, seed=1)
    m = new_model("pca-ann", small_2d, cfg, components=82, hidden=3)
    train_model(m, small_2d, cfg, "DJI")
    x, _ = model_inputs(m, small_2d, "val", "DJI")
    z = m.prepare(x)
    d_x = np.linalg.norm(x[0] - x[1])
    assert np.isclose(np.linalg.norm(z[0] - z[1]), d_x, rtol=1e-8)


def test_model_inputs_per_architecture(small_2d, small_3d):
    n = len(small_2d.indices("train", "NYSE"))
    cfg = TrainConfig()
    x, y = model_inputs(new_model("cnnpred2d", small_2d, cfg), small_2d, "train", "NYSE")
    assert x.shape == (n, 20, 82, 1) and y.shape == (n,)
    x, _ = model_inputs(new_model("ann", small_2d, cfg), small_2d, "train", "NYSE")
    assert x.shape == (n, 10)
    x, _ = model_inputs(new_model("cnnpred3d", small_3d, cfg), small_3d, "train", "NYSE")
    assert x.shape[1:] == (20, 5, 82)
    with pytest.raises(DimensionError):
        model_inputs(new_model("cnnpred3d", small_3d, cfg), small_2d, "train")


def test_training_is_deterministic(small_3d):
    cfg = TrainConfig(max_epochs=4, patience=None, seed=7)
    runs = []
    for _ in range(2):
        m = new_model("cnnpred3d", small_3d, cfg, filters=4)
        m, h = train_model(m, small_3d, cfg, "RUSSELL")
        runs.append((np.concatenate([p.ravel() for p in m.params()]).tobytes(), h.train_loss))
    assert runs[0] == runs[1]


def test_early_stopping_restores_the_best_epoch(small_2d):
    cfg = TrainConfig(max_epochs=40, patience=3, seed=2, learning_rate=0.01)
    m = new_model("cnnpred2d", small_2d, cfg, filters=4)
    m, h = train_model(m, small_2d, cfg)
    assert len(h) <= cfg.max_epochs
    assert h.best_epoch == int(np.argmin(h.val_loss)) + 1
    if h.stopped_early:
        assert len(h) == h.best_epoch + cfg.patience
    xva, yva = model_inputs(m, small_2d, "val")
    assert np.isclose(bce_loss(m.predict_proba(xva), yva), min(h.val_loss), rtol=1e-12)


def test_sanity_mode_never_raises_training_loss(rng):
    m = build_cnnpred2d(12, 4, 3, dropout=0.0, rng=Prng(3))
    x = rng.normal(size=(32, 12, 4, 1))
    y = (rng.random(32) < 0.5).astype(float)
    _, h = fit_arrays(m, x, y, x[:0], y[:0], TrainConfig(max_epochs=30, sanity=True, seed=3))
    assert np.all(np.diff(h.train_loss) <= 0)
    assert h.train_loss[-1] < h.train_loss[0]


def test_capacity_on_random_labels(rng):
    m = build_cnnpred2d(60, 82, 8, dropout=0.0, rng=Prng(1))
    x = rng.normal(size=(64, 60, 82, 1))
    y = (rng.random(64) < 0.5).astype(float)
    cfg = TrainConfig(dropout=0.0, patience=None, max_epochs=500, seed=1)
    m, h = fit_arrays(m, x, y, x[:0], y[:0], cfg)
    assert np.mean(m.predict_label(x) == y) >= 0.99


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    assert build_pca_ann(3, 4).build_args == {"components": 3, "hidden": 4}
