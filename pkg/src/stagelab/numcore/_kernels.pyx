# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col/col2im and max-pool kernels.

Signatures and results match :mod:`stagelab.numcore._kernels_py` exactly;
the pure-Python module is the fallback when this extension is not built.
"""
import numpy as np

from cython cimport floating
from libc.math cimport INFINITY


def _out_size(Py_ssize_t size, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    return (size + 2 * pad - k) // stride + 1


def im2col(floating[:, :, :, ::1] x, int kh, int kw, int stride, int pad):
    """Unfold NCHW input into a (N*Ho*Wo, C*kh*kw) patch matrix."""
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Ho = _out_size(H, kh, stride, pad)
    cdef Py_ssize_t Wo = _out_size(W, kw, stride, pad)
    dtype = np.float32 if floating is float else np.float64
    out = np.zeros((N * Ho * Wo, C * kh * kw), dtype=dtype)
    cdef floating[:, ::1] cols = out
    cdef Py_ssize_t n, c, i, j, oh, ow, h, w, row, col
    with nogil:
        for n in range(N):
            for oh in range(Ho):
                for ow in range(Wo):
                    row = (n * Ho + oh) * Wo + ow
                    for c in range(C):
                        for i in range(kh):
                            h = oh * stride - pad + i
                            if h < 0 or h >= H:
                                continue
                            col = (c * kh + i) * kw
                            for j in range(kw):
                                w = ow * stride - pad + j
                                if 0 <= w < W:
                                    cols[row, col + j] = x[n, c, h, w]
    return out


def col2im(floating[:, ::1] cols, Py_ssize_t N, Py_ssize_t C, Py_ssize_t H,
           Py_ssize_t W, int kh, int kw, int stride, int pad):
    """Adjoint of :func:`im2col`: scatter-add patch rows back to NCHW."""
    cdef Py_ssize_t Ho = _out_size(H, kh, stride, pad)
    cdef Py_ssize_t Wo = _out_size(W, kw, stride, pad)
    dtype = np.float32 if floating is float else np.float64
    out = np.zeros((N, C, H, W), dtype=dtype)
    cdef floating[:, :, :, ::1] dx = out
    cdef Py_ssize_t n, c, i, j, oh, ow, h, w, row, col
    with nogil:
        for n in range(N):
            for oh in range(Ho):
                for ow in range(Wo):
                    row = (n * Ho + oh) * Wo + ow
                    for c in range(C):
                        for i in range(kh):
                            h = oh * stride - pad + i
                            if h < 0 or h >= H:
                                continue
                            col = (c * kh + i) * kw
                            for j in range(kw):
                                w = ow * stride - pad + j
                                if 0 <= w < W:
                                    dx[n, c, h, w] += cols[row, col + j]
    return out


def maxpool_forward(floating[:, :, :, ::1] x, int k, int stride, int pad):
    """Max pool with -inf padding; returns (output, flat argmax into H*W)."""
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Ho = _out_size(H, k, stride, pad)
    cdef Py_ssize_t Wo = _out_size(W, k, stride, pad)
    dtype = np.float32 if floating is float else np.float64
    out = np.empty((N, C, Ho, Wo), dtype=dtype)
    arg = np.empty((N, C, Ho, Wo), dtype=np.int64)
    cdef floating[:, :, :, ::1] y = out
    cdef long long[:, :, :, ::1] a = arg
    cdef Py_ssize_t n, c, oh, ow, i, j, h, w
    cdef long long best_idx
    cdef floating best, v
    with nogil:
        for n in range(N):
            for c in range(C):
                for oh in range(Ho):
                    for ow in range(Wo):
                        best = -INFINITY
                        best_idx = -1
                        for i in range(k):
                            h = oh * stride - pad + i
                            if h < 0 or h >= H:
                                continue
                            for j in range(k):
                                w = ow * stride - pad + j
                                if w < 0 or w >= W:
                                    continue
                                v = x[n, c, h, w]
                                if v > best or best_idx < 0:
                                    best = v
                                    best_idx = h * W + w
                        y[n, c, oh, ow] = best
                        a[n, c, oh, ow] = best_idx
    return out, arg


def maxpool_backward(floating[:, :, :, ::1] grad, long long[:, :, :, ::1] arg,
                     Py_ssize_t H, Py_ssize_t W):
    """Route each pooled gradient to the input position that won the max."""
    cdef Py_ssize_t N = grad.shape[0], C = grad.shape[1]
    cdef Py_ssize_t Ho = grad.shape[2], Wo = grad.shape[3]
    dtype = np.float32 if floating is float else np.float64
    out = np.zeros((N, C, H, W), dtype=dtype)
    cdef floating[:, :, :, ::1] dx = out
    cdef Py_ssize_t n, c, oh, ow
    cdef long long idx
    with nogil:
        for n in range(N):
            for c in range(C):
                for oh in range(Ho):
                    for ow in range(Wo):
                        idx = arg[n, c, oh, ow]
                        dx[n, c, idx // W, idx % W] += grad[n, c, oh, ow]
    return out
