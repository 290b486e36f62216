"""Array kernels: layers with backward passes, Adam, SplitMix64, PCA.

Tensors are plain ``numpy.float64`` arrays.
"""

from ._backend import BACKEND, BACKENDS
from .adam import AdamState, adam_step
from .layers import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2x1,
    PoolIndices,
    bce_grad,
    bce_loss,
    conv_backward,
    conv_forward,
    dense_forward,
    dropout_forward,
    glorot_uniform,
    maxpool_backward,
    maxpool_forward,
    relu,
    sigmoid,
)
from .pca import PcaFit, jacobi_eigh, pca_fit, pca_inverse_transform, pca_transform
from .prng import Prng, prng_next

__all__ = [
    "BACKEND", "BACKENDS", "AdamState", "adam_step", "Conv2D", "Dense", "Dropout",
    "Flatten", "MaxPool2x1", "PoolIndices", "bce_grad", "bce_loss", "conv_backward",
    "conv_forward", "dense_forward", "dropout_forward", "glorot_uniform",
    "maxpool_backward", "maxpool_forward", "relu", "sigmoid", "PcaFit", "jacobi_eigh",
    "pca_fit", "pca_inverse_transform", "pca_transform", "Prng", "prng_next",
]
