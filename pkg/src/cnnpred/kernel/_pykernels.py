"""Numpy implementations of the hot convolution and pooling loops.

Used when the compiled ``_ckernels`` extension is unavailable or when
``CNNPRED_KERNEL=python`` is set. Signatures mirror the extension exactly.

Layouts: activations are ``[batch, height, width, channels]``; filters are
``[out_channels, filter_height, filter_width, in_channels]``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _patches(x, fh, fw):
    # [B, Ho, Wo, C, Fh, Fw] view -> [B*Ho*Wo, Fh*Fw*C] matrix matching filter layout
    win = sliding_window_view(x, (fh, fw), axis=(1, 2))
    b, ho, wo = win.shape[:3]
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(b * ho * wo, -1), (b, ho, wo)


def conv_forward(x, w, b):
    """Valid, stride-1 convolution returning pre-activations ``[B, Ho, Wo, K]``."""
    k, fh, fw, _ = w.shape
    cols, (nb, ho, wo) = _patches(x, fh, fw)
    out = cols @ w.reshape(k, -1).T
    out += b
    return out.reshape(nb, ho, wo, k)


def conv_backward(x, w, grad_pre, need_input_grad=True):
    """Gradients of the pre-activation convolution.

    Returns ``(grad_x, grad_w, grad_b)``; ``grad_x`` is None when not requested.
    """
    k, fh, fw, c = w.shape
    cols, (nb, ho, wo) = _patches(x, fh, fw)
    g = grad_pre.reshape(-1, k)
    grad_w = (g.T @ cols).reshape(w.shape)
    grad_b = g.sum(axis=0)
    if not need_input_grad:
        return None, grad_w, grad_b
    gcols = (g @ w.reshape(k, -1)).reshape(nb, ho, wo, fh, fw, c)
    grad_x = np.zeros_like(x)
    for a in range(fh):
        for bb in range(fw):
            grad_x[:, a:a + ho, bb:bb + wo, :] += gcols[:, :, :, a, bb, :]
    return grad_x, grad_w, grad_b


def maxpool_forward(x):
    """2x1 max pooling, stride 2 along height; a trailing odd row is dropped.

    Returns ``(out, argmax)`` where ``argmax`` is 0 or 1 (offset inside the
    window); ties resolve to 0.
    """
    ho = x.shape[1] // 2
    top = x[:, 0:2 * ho:2]
    bottom = x[:, 1:2 * ho:2]
    argmax = (bottom > top).astype(np.uint8)
    out = np.where(argmax == 1, bottom, top)
    return out, argmax


def maxpool_backward(argmax, grad_out, in_height):
    nb, ho, w, c = grad_out.shape
    grad_x = np.zeros((nb, in_height, w, c), dtype=np.float64)
    sel = argmax.astype(bool)
    grad_x[:, 0:2 * ho:2] = np.where(sel, 0.0, grad_out)
    grad_x[:, 1:2 * ho:2] = np.where(sel, grad_out, 0.0)
    return grad_x
