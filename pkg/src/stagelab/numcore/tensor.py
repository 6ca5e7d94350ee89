"""Dense tensors with tape-free reverse-mode differentiation.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients. ``backward`` walks
the graph in reverse topological order. Gradients are only accumulated for
tensors with ``requires_grad``; an op whose inputs all have it unset records
nothing, so frozen parts of a network cost a plain forward pass.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import kernels

DTYPES = {"f32": np.float32, "f64": np.float64}


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def numpy(self):
        return self.data

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable leaf."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar tensor")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        _accumulate(self, np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # interior gradients are no longer needed
                    node.grad = None

    # Operator sugar used by tests and small models.
    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _accumulate(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _result(data, parents, backward):
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward)


def add(a, b):
    if a.shape != b.shape:
        raise ShapeError("add", a.shape, b.shape)

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, (a, b), backward)


def matmul(a, b):
    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), backward)


def relu(x):
    mask = x.data > 0

    def backward(g):
        _accumulate(x, g * mask)

    return _result(np.where(mask, x.data, 0).astype(x.dtype, copy=False), (x,), backward)


def sigmoid(x):
    out = _stable_sigmoid(x.data)

    def backward(g):
        _accumulate(x, g * out * (1 - out))

    return _result(out, (x,), backward)


def softmax(x):
    out = _softmax_rows(x.data)

    def backward(g):
        inner = (g * out).sum(axis=1, keepdims=True)
        _accumulate(x, out * (g - inner))

    return _result(out, (x,), backward)


def dense(x, w, b):
    """Affine map ``x @ w + b`` for (N, D) inputs and (D, K) weights."""
    if x.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError("dense", (None, w.shape[0]), x.shape)

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g @ w.data.T)
        if w.requires_grad:
            _accumulate(w, x.data.T @ g)
        if b.requires_grad:
            _accumulate(b, g.sum(axis=0))

    return _result(x.data @ w.data + b.data, (x, w, b), backward)


def conv2d(x, w, b, stride=1, pad=0):
    """2-D cross-correlation on NCHW input with (Cout, Cin, kh, kw) weights."""
    n, c, h, wd = x.shape
    cout, cin, kh, kw = w.shape
    if c != cin:
        raise ShapeError("conv2d", (n, cin, h, wd), x.shape)
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError("conv2d", (n, cin, kh - 2 * pad, kw - 2 * pad), x.shape)
    pointwise = kh == 1 and kw == 1 and pad == 0
    if pointwise:
        xs = x.data[:, :, ::stride, ::stride] if stride > 1 else x.data
        cols = np.ascontiguousarray(xs.transpose(0, 2, 3, 1)).reshape(-1, c)
    else:
        cols = kernels.im2col(np.ascontiguousarray(x.data), kh, kw, stride, pad)
    wmat = w.data.reshape(cout, -1)
    out = cols @ wmat.T
    out += b.data
    out = np.ascontiguousarray(out.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2))
    if not w.requires_grad:
        cols = None  # not needed for the input gradient

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, cout)
        if w.requires_grad:
            _accumulate(w, (g2.T @ cols).reshape(w.shape))
        if b.requires_grad:
            _accumulate(b, g2.sum(axis=0))
        if x.requires_grad:
            dcols = g2 @ wmat
            if pointwise:
                dx = np.zeros_like(x.data)
                dx[:, :, ::stride, ::stride] = dcols.reshape(n, ho, wo, c).transpose(0, 3, 1, 2)
            else:
                dx = kernels.col2im(np.ascontiguousarray(dcols), n, c, h, wd, kh, kw, stride, pad)
            _accumulate(x, dx)

    return _result(out, (x, w, b), backward)


def batch_norm(x, gamma, beta, mean, var, eps=1.001e-5):
    """Batch norm with stored statistics (inference semantics) on NCHW input."""
    if x.data.ndim != 4 or x.shape[1] != gamma.shape[0]:
        raise ShapeError("batch_norm", (None, gamma.shape[0], None, None), x.shape)
    inv_std = 1.0 / np.sqrt(var.data + eps)
    scale = gamma.data * inv_std
    shift = beta.data - mean.data * scale
    out = x.data * scale[:, None, None] + shift[:, None, None]

    def backward(g):
        axes = (0, 2, 3)
        if x.requires_grad:
            _accumulate(x, g * scale[:, None, None])
        if beta.requires_grad:
            _accumulate(beta, g.sum(axis=axes))
        if gamma.requires_grad or var.requires_grad:
            centered_sum = (g * (x.data - mean.data[:, None, None])).sum(axis=axes)
            if gamma.requires_grad:
                _accumulate(gamma, centered_sum * inv_std)
            if var.requires_grad:
                _accumulate(var, -0.5 * centered_sum * gamma.data * inv_std ** 3)
        if mean.requires_grad:
            _accumulate(mean, -g.sum(axis=axes) * scale)

    return _result(out.astype(x.dtype, copy=False), (x, gamma, beta, mean, var), backward)


def max_pool2d(x, k=3, stride=2, pad=1):
    n, c, h, w = x.shape
    out, arg = kernels.maxpool_forward(np.ascontiguousarray(x.data), k, stride, pad)

    def backward(g):
        _accumulate(x, kernels.maxpool_backward(np.ascontiguousarray(g), arg, h, w))

    return _result(out, (x,), backward)


def global_avg_pool(x):
    n, c, h, w = x.shape

    def backward(g):
        _accumulate(x, np.broadcast_to(g[:, :, None, None] / (h * w), x.shape))

    return _result(x.data.mean(axis=(2, 3)), (x,), backward)


def bce_with_logits(logits, labels, weights=None):
    """Mean binary cross-entropy of sigmoid(logits) against 0/1 labels."""
    z = logits.data.reshape(-1)
    y = np.asarray(labels, dtype=z.dtype).reshape(-1)
    if z.shape != y.shape:
        raise ShapeError("bce_with_logits", z.shape, y.shape)
    per_sample = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    w = np.ones_like(z) if weights is None else np.asarray(weights, dtype=z.dtype)
    loss = np.asarray((w * per_sample).sum() / z.size, dtype=z.dtype)

    def backward(g):
        dz = g * w * (_stable_sigmoid(z) - y) / z.size
        _accumulate(logits, dz.reshape(logits.shape))

    return _result(loss, (logits,), backward)


def cce_with_logits(logits, onehot, weights=None):
    """Mean categorical cross-entropy of softmax(logits) against one-hot rows."""
    z = logits.data
    y = np.asarray(onehot, dtype=z.dtype)
    if z.shape != y.shape:
        raise ShapeError("cce_with_logits", z.shape, y.shape)
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    per_sample = -(y * (shifted - log_norm)).sum(axis=1)
    w = np.ones(z.shape[0], dtype=z.dtype) if weights is None else np.asarray(weights, dtype=z.dtype)
    loss = np.asarray((w * per_sample).sum() / z.shape[0], dtype=z.dtype)

    def backward(g):
        dz = g * w[:, None] * (_softmax_rows(z) - y) / z.shape[0]
        _accumulate(logits, dz)

    return _result(loss, (logits,), backward)


def _stable_sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax_rows(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)
