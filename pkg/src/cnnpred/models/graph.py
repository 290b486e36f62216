"""Model graphs for the two CNN variants and the shallow-ANN baselines."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..kernel import Conv2D, Dense, Dropout, Flatten, MaxPool2x1, PcaFit, Prng, pca_transform

ARCHITECTURES = ("cnnpred2d", "cnnpred3d", "ann", "pca-ann")


class ModelGraph:
    """An ordered stack of layers ending in a single sigmoid unit.

    ``input_shape`` is per sample (no batch axis). ``build_args`` records the
    builder call so checkpoints can rebuild the same graph.
    """

    def __init__(self, arch: str, input_shape: tuple, layers: list, build_args: dict):
        if arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {arch!r}")
        self.arch = arch
        self.input_shape = tuple(input_shape)
        self.layers = layers
        self.build_args = dict(build_args)
        self.pca: PcaFit | None = None
        self.shapes = self._infer_shapes()
        if self.shapes[-1] != (1,):
            raise DimensionError(f"model output shape {self.shapes[-1]} is not (1,)")
        # the input never needs a gradient during training
        for layer in self.layers:
            if layer.trainable:
                layer.need_input_grad = False
                break

    def _infer_shapes(self):
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(tuple(layer.output_shape(shapes[-1])))
        return shapes

    @property
    def flatten_width(self) -> int:
        for layer, shape in zip(self.layers, self.shapes[1:]):
            if isinstance(layer, Flatten):
                return shape[0]
        return self.input_shape[0]

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params()))

    def set_params(self, values) -> None:
        for p, v in zip(self.params(), values, strict=True):
            if p.shape != np.shape(v):
                raise DimensionError(f"parameter shape {np.shape(v)} != {p.shape}")
            p[...] = v

    def set_rng(self, rng: Prng) -> None:
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rng = rng

    def prepare(self, x: np.ndarray) -> np.ndarray:
        """Map raw model inputs to the first layer's layout (PCA projection)."""
        if self.arch == "pca-ann":
            if self.pca is None:
                raise ValueError("PCA+ANN model used before its PCA was fitted")
            return pca_transform(x, self.pca)
        return x

    def forward(self, x, training=False) -> np.ndarray:
        """Probabilities ``[batch]`` for already-prepared inputs."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise DimensionError(f"input shape {x.shape[1:]} != model input {self.input_shape}")
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x[:, 0]

    def backward(self, grad_prob) -> None:
        g = np.asarray(grad_prob, dtype=np.float64)[:, None]
        for layer in reversed(self.layers):
            g = layer.backward(g)
            if g is None:
                break

    def predict_proba(self, x, batch_size=2048) -> np.ndarray:
        x = self.prepare(np.asarray(x, dtype=np.float64))
        if len(x) == 0:
            return np.zeros(0)
        return np.concatenate([self.forward(x[i:i + batch_size])
                               for i in range(0, len(x), batch_size)])

    def predict_label(self, x) -> np.ndarray:
        """1 where the probability is at least 0.5 (a tie counts as up)."""
        return (self.predict_proba(x) >= 0.5).astype(np.uint8)

    def summary(self) -> str:
        lines = [f"{self.arch}: input {self.input_shape}"]
        for layer, shape in zip(self.layers, self.shapes[1:]):
            n = sum(p.size for p in layer.params())
            lines.append(f"  {type(layer).__name__:<10} -> {shape}  params={n}")
        lines.append(f"  total params={self.n_params}")
        return "\n".join(lines)


def _cnn_tail(filters, dropout, rng):
    return [
        MaxPool2x1(),
        Dropout(dropout),
        Conv2D(3, 1, filters, filters, "relu", rng),
        MaxPool2x1(),
        Dropout(dropout),
        Flatten(),
    ]


def build_cnnpred2d(in_days=60, in_features=82, filters=8, dropout=0.1, rng: Prng | None = None):
    """Daily 1 x features filters, then two (3x1 conv, 2x1 pool) stages, one sigmoid unit."""
    rng = rng or Prng(0)
    layers = [
        Conv2D(1, in_features, 1, filters, "relu", rng),
        Conv2D(3, 1, filters, filters, "relu", rng),
    ] + _cnn_tail(filters, dropout, rng)
    flat = _flat_width((in_days, in_features, 1), layers)
    layers.append(Dense(flat, 1, "sigmoid", rng))
    return ModelGraph("cnnpred2d", (in_days, in_features, 1), layers,
                      {"in_days": in_days, "in_features": in_features, "filters": filters,
                       "dropout": dropout})


def build_cnnpred3d(in_days=60, markets=5, depth=82, filters=8, dropout=0.1, rng: Prng | None = None):
    """1x1 filters over the feature depth, a 3 x markets filter, then as the 2D variant."""
    rng = rng or Prng(0)
    layers = [
        Conv2D(1, 1, depth, filters, "relu", rng),
        Conv2D(3, markets, filters, filters, "relu", rng),
    ] + _cnn_tail(filters, dropout, rng)
    flat = _flat_width((in_days, markets, depth), layers)
    layers.append(Dense(flat, 1, "sigmoid", rng))
    return ModelGraph("cnnpred3d", (in_days, markets, depth), layers,
                      {"in_days": in_days, "markets": markets, "depth": depth,
                       "filters": filters, "dropout": dropout})


def build_shallow_ann(in_size=10, hidden=20, rng: Prng | None = None, arch="ann"):
    """One tanh hidden layer and a sigmoid output unit."""
    rng = rng or Prng(0)
    layers = [Dense(in_size, hidden, "tanh", rng), Dense(hidden, 1, "sigmoid", rng)]
    return ModelGraph(arch, (in_size,), layers, {"in_size": in_size, "hidden": hidden})


def build_pca_ann(components=10, hidden=20, rng: Prng | None = None):
    """Shallow ANN over ``components`` principal-component scores.

    The PCA itself is fitted on the training inputs by the trainer.
    """
    model = build_shallow_ann(components, hidden, rng, arch="pca-ann")
    model.build_args = {"components": components, "hidden": hidden}
    return model


def _flat_width(input_shape, layers):
    shape = input_shape
    for layer in layers:
        shape = layer.output_shape(shape)
    return shape[0]


def build_model(arch: str, rng: Prng | None = None, **kwargs) -> ModelGraph:
    builders = {"cnnpred2d": build_cnnpred2d, "cnnpred3d": build_cnnpred3d,
                "ann": build_shallow_ann, "pca-ann": build_pca_ann}
    if arch not in builders:
        raise ValueError(f"unknown architecture {arch!r}; choose from {', '.join(ARCHITECTURES)}")
    return builders[arch](rng=rng, **kwargs)
