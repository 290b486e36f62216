"""Layers, activations and loss with hand-written backward passes.

Layer objects work on batches (``[batch, height, width, channels]`` for the
spatial layers, ``[batch, features]`` for dense). The module-level functions
(``conv_forward``, ``maxpool_forward`` ...) are single-sample conveniences over
the same code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from ._backend import kernels
from .prng import Prng

PROB_CLAMP = 1e-12


# -- activations ---------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)), evaluated without overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def _activate(name, pre):
    if name == "relu":
        return relu(pre)
    if name == "sigmoid":
        return sigmoid(pre)
    if name == "tanh":
        return np.tanh(pre)
    if name == "identity":
        return pre
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name, pre, out, grad_out):
    if name == "relu":
        return np.where(pre > 0.0, grad_out, 0.0)
    if name == "sigmoid":
        return grad_out * out * (1.0 - out)
    if name == "tanh":
        return grad_out * (1.0 - out * out)
    if name == "identity":
        return grad_out
    raise ValueError(f"unknown activation {name!r}")


ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")


# -- loss ----------------------------------------------------------------------

def bce_loss(prob, label):
    """Mean binary cross-entropy; probabilities clamped to [1e-12, 1 - 1e-12]."""
    p = np.clip(np.asarray(prob, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(label, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def bce_grad(prob, label):
    """Gradient of :func:`bce_loss` with respect to each probability."""
    prob = np.asarray(prob, dtype=np.float64)
    p = np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(label, dtype=np.float64)
    g = (-y / p + (1.0 - y) / (1.0 - p)) / p.size
    # the clamp is flat outside its range
    return np.where((prob < PROB_CLAMP) | (prob > 1.0 - PROB_CLAMP), 0.0, g)


# -- layers --------------------------------------------------------------------

def glorot_uniform(rng: Prng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return (2.0 * rng.uniform_array(shape) - 1.0) * limit


class Layer:
    trainable = False

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def output_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def config(self) -> dict:
        return {"type": type(self).__name__}


class Conv2D(Layer):
    """Valid-mode, stride-1 convolution with a fused activation."""

    trainable = True

    def __init__(self, filter_height, filter_width, in_channels, out_channels,
                 activation="relu", rng: Prng | None = None):
        if min(filter_height, filter_width, in_channels, out_channels) < 1:
            raise DimensionError("convolution dimensions must be positive")
        if activation not in ("relu", "identity"):
            raise ValueError(f"unsupported conv activation {activation!r}")
        self.filter_height = int(filter_height)
        self.filter_width = int(filter_width)
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.activation = activation
        shape = (self.out_channels, self.filter_height, self.filter_width, self.in_channels)
        if rng is None:
            self.weight = np.zeros(shape)
        else:
            receptive = self.filter_height * self.filter_width
            self.weight = glorot_uniform(rng, shape, receptive * self.in_channels,
                                         receptive * self.out_channels)
        self.bias = np.zeros(self.out_channels)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self.need_input_grad = True
        self._x = self._pre = self._out = None

    def params(self):
        return [self.weight, self.bias]

    def grads(self):
        return [self.grad_weight, self.grad_bias]

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.in_channels:
            raise DimensionError(f"channel axis: expected {self.in_channels}, got {c}")
        if h < self.filter_height:
            raise DimensionError(f"height axis: input {h} shorter than filter {self.filter_height}")
        if w < self.filter_width:
            raise DimensionError(f"width axis: input {w} narrower than filter {self.filter_width}")
        return (h - self.filter_height + 1, w - self.filter_width + 1, self.out_channels)

    def forward(self, x, training=False):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 4:
            raise DimensionError(f"conv input must be [batch, height, width, channels], got {x.shape}")
        self.output_shape(x.shape[1:])
        pre = kernels.conv_forward(x, self.weight, self.bias)
        out = _activate(self.activation, pre)
        self._x, self._pre, self._out = x, pre, out
        return out

    def backward(self, grad_out):
        if grad_out.shape != self._out.shape:
            raise DimensionError(f"upstream gradient shape {grad_out.shape} != output {self._out.shape}")
        gpre = _activation_grad(self.activation, self._pre, self._out, grad_out)
        gx, gw, gb = kernels.conv_backward(self._x, self.weight, np.ascontiguousarray(gpre),
                                           self.need_input_grad)
        self.grad_weight[...] = gw
        self.grad_bias[...] = gb
        return gx

    def config(self):
        return {"type": "Conv2D", "filter_height": self.filter_height,
                "filter_width": self.filter_width, "in_channels": self.in_channels,
                "out_channels": self.out_channels, "activation": self.activation}


@dataclass
class PoolIndices:
    """Winning row offset (0 or 1) per pooled cell, plus the original height."""

    offsets: np.ndarray
    in_height: int


class MaxPool2x1(Layer):
    """Non-overlapping 2x1 max pooling along height; odd trailing rows dropped."""

    def __init__(self):
        self._idx = None

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if h < 2:
            raise DimensionError(f"height axis: pooling needs at least 2 rows, got {h}")
        return (h // 2, w, c)

    def forward(self, x, training=False):
        x = np.ascontiguousarray(x, dtype=np.float64)
        self.output_shape(x.shape[1:])
        out, offsets = kernels.maxpool_forward(x)
        self._idx = PoolIndices(offsets, x.shape[1])
        return out

    def backward(self, grad_out):
        return kernels.maxpool_backward(self._idx.offsets, np.ascontiguousarray(grad_out),
                                        self._idx.in_height)


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by 1/(1 - rate) while training."""

    def __init__(self, rate, rng: Prng | None = None):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)
        self.rng = rng
        self._scale = None

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._scale = None
            return x
        keep = self.rng.uniform_array(x.shape) >= self.rate
        self._scale = keep / (1.0 - self.rate)
        return x * self._scale

    def backward(self, grad_out):
        return grad_out if self._scale is None else grad_out * self._scale

    def config(self):
        return {"type": "Dropout", "rate": self.rate}


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)


class Dense(Layer):
    """Fully connected layer: ``act(x @ W + b)`` with ``W`` of shape [in, out]."""

    trainable = True

    def __init__(self, in_size, out_size, activation="identity", rng: Prng | None = None):
        if in_size < 1 or out_size < 1:
            raise DimensionError("dense sizes must be positive")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.in_size = int(in_size)
        self.out_size = int(out_size)
        self.activation = activation
        shape = (self.in_size, self.out_size)
        self.weight = (np.zeros(shape) if rng is None
                       else glorot_uniform(rng, shape, self.in_size, self.out_size))
        self.bias = np.zeros(self.out_size)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self.need_input_grad = True
        self._x = self._pre = self._out = None

    def params(self):
        return [self.weight, self.bias]

    def grads(self):
        return [self.grad_weight, self.grad_bias]

    def output_shape(self, in_shape):
        if in_shape != (self.in_size,):
            raise DimensionError(f"feature axis: expected {self.in_size}, got {in_shape}")
        return (self.out_size,)

    def forward(self, x, training=False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_size:
            raise DimensionError(f"feature axis: expected {self.in_size}, got shape {x.shape}")
        pre = x @ self.weight + self.bias
        out = _activate(self.activation, pre)
        self._x, self._pre, self._out = x, pre, out
        return out

    def backward(self, grad_out):
        gpre = _activation_grad(self.activation, self._pre, self._out, grad_out)
        self.grad_weight[...] = self._x.T @ gpre
        self.grad_bias[...] = gpre.sum(axis=0)
        return gpre @ self.weight.T if self.need_input_grad else None

    def config(self):
        return {"type": "Dense", "in_size": self.in_size, "out_size": self.out_size,
                "activation": self.activation}


# -- single-sample functional forms ---------------------------------------------

def _as_hwc(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"expected a [height, width, channels] array, got shape {x.shape}")
    return x[None]


def conv_forward(x, layer: Conv2D):
    return layer.forward(_as_hwc(x))[0]


def conv_backward(x, layer: Conv2D, grad_out):
    """Return ``(grad_input, grad_weight, grad_bias)`` for one sample."""
    layer.forward(_as_hwc(x))
    grad_out = np.asarray(grad_out, dtype=np.float64)
    expected = layer._out.shape[1:]
    if grad_out.shape != expected:
        raise DimensionError(f"upstream gradient shape {grad_out.shape} != output {expected}")
    gx = layer.backward(grad_out[None])
    return gx[0], layer.grad_weight.copy(), layer.grad_bias.copy()


def maxpool_forward(x):
    x = _as_hwc(x)
    pool = MaxPool2x1()
    out = pool.forward(x)
    return out[0], PoolIndices(pool._idx.offsets[0], x.shape[1])


def maxpool_backward(indices: PoolIndices, grad_out):
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != indices.offsets.shape:
        raise DimensionError(f"upstream gradient shape {grad_out.shape} != pooled {indices.offsets.shape}")
    return kernels.maxpool_backward(indices.offsets[None], grad_out[None], indices.in_height)[0]


def dense_forward(x, layer: Dense):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"dense input must be a vector, got shape {x.shape}")
    return layer.forward(x[None])[0]


def dropout_forward(x, rate, training, rng: Prng | None = None):
    """Return ``(output, mask)``; the mask is all ones when inactive."""
    x = np.asarray(x, dtype=np.float64)
    layer = Dropout(rate, rng)
    out = layer.forward(x, training=training)
    mask = np.ones_like(x, dtype=bool) if layer._scale is None else layer._scale > 0
    return out, mask
