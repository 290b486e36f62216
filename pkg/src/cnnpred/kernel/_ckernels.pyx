# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution and pooling loops.

Same contracts as ``_pykernels``. Loops are serial so results are
bit-reproducible run to run.
"""

import numpy as np

from . import _pykernels

cdef enum:
    MAX_FILTERS = 256      # stack accumulator size for conv_forward


def conv_forward(x, w, b):
    cdef Py_ssize_t nb = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t k = w.shape[0], fh = w.shape[1], fw = w.shape[2]
    cdef Py_ssize_t ho = h - fh + 1, wo = wd - fw + 1
    cdef Py_ssize_t span = fw * c
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64).reshape(nb, h, wd * c)
    # filters as [fh, span, k] so the innermost loop runs over independent outputs
    cdef double[:, :, ::1] wv = np.ascontiguousarray(
        np.asarray(w, dtype=np.float64).reshape(k, fh, span).transpose(1, 2, 0))
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty((nb, ho, wo, k), dtype=np.float64)
    cdef double[:, :, :, ::1] ov = out
    cdef Py_ssize_t n, i, j, kk, a, t, off
    cdef double xval
    cdef double acc[MAX_FILTERS]
    cdef const double* wp
    cdef const double* xp
    if k > MAX_FILTERS:
        return _pykernels.conv_forward(x, w, b)
    for n in range(nb):
        for i in range(ho):
            for j in range(wo):
                off = j * c
                for kk in range(k):
                    acc[kk] = bv[kk]
                for a in range(fh):
                    xp = &xv[n, i + a, off]
                    wp = &wv[a, 0, 0]
                    for t in range(span):
                        xval = xp[t]
                        for kk in range(k):
                            acc[kk] += xval * wp[t * k + kk]
                for kk in range(k):
                    ov[n, i, j, kk] = acc[kk]
    return out


def conv_backward(x, w, grad_pre, bint need_input_grad=True):
    cdef Py_ssize_t nb = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t k = w.shape[0], fh = w.shape[1], fw = w.shape[2]
    cdef Py_ssize_t ho = h - fh + 1, wo = wd - fw + 1
    cdef Py_ssize_t span = fw * c
    cdef double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64).reshape(nb, h, wd * c)
    cdef double[:, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64).reshape(k, fh, span)
    cdef double[:, :, :, ::1] gv = np.ascontiguousarray(grad_pre, dtype=np.float64)
    grad_w = np.zeros((k, fh, span), dtype=np.float64)
    grad_b = np.zeros(k, dtype=np.float64)
    cdef double[:, :, ::1] gwv = grad_w
    cdef double[::1] gbv = grad_b
    cdef double[:, :, ::1] gxv
    grad_x = None
    if need_input_grad:
        grad_x = np.zeros((nb, h, wd * c), dtype=np.float64)
        gxv = grad_x
    cdef Py_ssize_t n, i, j, kk, a, t, off
    cdef double g
    for n in range(nb):
        for i in range(ho):
            for j in range(wo):
                off = j * c
                for kk in range(k):
                    g = gv[n, i, j, kk]
                    if g == 0.0:
                        continue
                    gbv[kk] += g
                    for a in range(fh):
                        for t in range(span):
                            gwv[kk, a, t] += g * xv[n, i + a, off + t]
                        if need_input_grad:
                            for t in range(span):
                                gxv[n, i + a, off + t] += g * wv[kk, a, t]
    if need_input_grad:
        grad_x = grad_x.reshape(nb, h, wd, c)
    return grad_x, grad_w.reshape(k, fh, fw, c), grad_b


def maxpool_forward(x):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t nb = xv.shape[0], h = xv.shape[1], wd = xv.shape[2], c = xv.shape[3]
    cdef Py_ssize_t ho = h // 2
    out = np.empty((nb, ho, wd, c), dtype=np.float64)
    argmax = np.empty((nb, ho, wd, c), dtype=np.uint8)
    cdef double[:, :, :, ::1] ov = out
    cdef unsigned char[:, :, :, ::1] av = argmax
    cdef Py_ssize_t n, i, j, ch
    cdef double top, bottom
    for n in range(nb):
        for i in range(ho):
            for j in range(wd):
                for ch in range(c):
                    top = xv[n, 2 * i, j, ch]
                    bottom = xv[n, 2 * i + 1, j, ch]
                    if bottom > top:
                        ov[n, i, j, ch] = bottom
                        av[n, i, j, ch] = 1
                    else:
                        ov[n, i, j, ch] = top
                        av[n, i, j, ch] = 0
    return out, argmax


def maxpool_backward(argmax, grad_out, Py_ssize_t in_height):
    cdef unsigned char[:, :, :, ::1] av = np.ascontiguousarray(argmax, dtype=np.uint8)
    cdef double[:, :, :, ::1] gv = np.ascontiguousarray(grad_out, dtype=np.float64)
    cdef Py_ssize_t nb = gv.shape[0], ho = gv.shape[1], wd = gv.shape[2], c = gv.shape[3]
    grad_x = np.zeros((nb, in_height, wd, c), dtype=np.float64)
    cdef double[:, :, :, ::1] gxv = grad_x
    cdef Py_ssize_t n, i, j, ch
    for n in range(nb):
        for i in range(ho):
            for j in range(wd):
                for ch in range(c):
                    gxv[n, 2 * i + av[n, i, j, ch], j, ch] = gv[n, i, j, ch]
    return grad_x
