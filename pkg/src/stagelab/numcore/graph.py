"""Layer graphs: residual conv stacks and dense heads built from tensor ops.

A :class:`LayerGraph` is an ordered list of top-level nodes. Nodes own no
values; they declare parameter names/shapes/kinds and read the matching
tensors from a :class:`~stagelab.numcore.params.ParameterStore` at run time.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import NonFiniteError, ShapeError
from . import tensor as T
from .params import Parameter, ParameterStore

BN_EPS = 1.001e-5


def _checked(t, layer):
    if not np.isfinite(t.data).all():
        raise NonFiniteError(layer)
    return t


class Node:
    name = ""
    is_head = False

    def param_specs(self):
        """List of ``(name, shape, kind)`` owned by this node."""
        return []

    def out_shape(self, in_shape):
        return in_shape

    def apply(self, x, P):
        raise NotImplementedError


class Conv2D(Node):
    def __init__(self, name, cin, cout, k, stride=1, pad=0):
        self.name, self.cin, self.cout = name, cin, cout
        self.k, self.stride, self.pad = k, stride, pad

    def param_specs(self):
        return [
            (f"{self.name}.weight", (self.cout, self.cin, self.k, self.k), "conv_weight"),
            (f"{self.name}.bias", (self.cout,), "conv_bias"),
        ]

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if c != self.cin:
            raise ShapeError(self.name, (self.cin, h, w), in_shape)
        size = lambda s: (s + 2 * self.pad - self.k) // self.stride + 1
        return (self.cout, size(h), size(w))

    def apply(self, x, P):
        if x.shape[1] != self.cin:
            raise ShapeError(self.name, (x.shape[0], self.cin) + x.shape[2:], x.shape)
        out = T.conv2d(x, P[f"{self.name}.weight"], P[f"{self.name}.bias"], self.stride, self.pad)
        return _checked(out, self.name)


class BatchNorm(Node):
    def __init__(self, name, channels):
        self.name, self.channels = name, channels

    def param_specs(self):
        c = (self.channels,)
        return [
            (f"{self.name}.gamma", c, "bn_scale"),
            (f"{self.name}.beta", c, "bn_shift"),
            (f"{self.name}.moving_mean", c, "bn_moving_mean"),
            (f"{self.name}.moving_var", c, "bn_moving_var"),
        ]

    def apply(self, x, P):
        n = self.name
        store = getattr(P, "calibrate", None)
        if store is not None:
            mean = x.data.mean(axis=(0, 2, 3))
            var = x.data.var(axis=(0, 2, 3))
            for key, stat in ((f"{n}.moving_mean", mean), (f"{n}.moving_var", var)):
                store[key].value[...] = stat
                P[key].data = store[key].value
        out = T.batch_norm(
            x, P[f"{n}.gamma"], P[f"{n}.beta"], P[f"{n}.moving_mean"], P[f"{n}.moving_var"], BN_EPS
        )
        return _checked(out, n)


class Stem(Node):
    """7x7/2 conv, batch norm, ReLU, 3x3/2 max pool."""

    def __init__(self, name, cin, cout, kernel=7):
        self.name = name
        self.conv = Conv2D(f"{name}.conv", cin, cout, kernel, stride=2, pad=kernel // 2)
        self.bn = BatchNorm(f"{name}.bn", cout)

    def param_specs(self):
        return self.conv.param_specs() + self.bn.param_specs()

    def out_shape(self, in_shape):
        c, h, w = self.conv.out_shape(in_shape)
        return (c, (h + 2 - 3) // 2 + 1, (w + 2 - 3) // 2 + 1)

    def apply(self, x, P):
        x = T.relu(self.bn.apply(self.conv.apply(x, P), P))
        return _checked(T.max_pool2d(x, 3, 2, 1), f"{self.name}.pool")


class Bottleneck(Node):
    """1x1 -> 3x3 -> 1x1 residual unit.

    ``projection`` selects a conv_block (1x1 conv + BN shortcut) instead of
    an identity_block. The stride sits on the first 1x1 conv and on the
    shortcut conv.
    """

    def __init__(self, name, cin, width, cout, stride=1, projection=False, stage=0, index=0):
        if not projection and (cin != cout or stride != 1):
            raise ValueError(f"{name}: identity shortcut needs cin == cout and stride 1")
        self.name, self.cin, self.width, self.cout = name, cin, width, cout
        self.stride, self.projection = stride, projection
        self.stage, self.index = stage, index
        self.conv1 = Conv2D(f"{name}.conv1", cin, width, 1, stride=stride)
        self.bn1 = BatchNorm(f"{name}.bn1", width)
        self.conv2 = Conv2D(f"{name}.conv2", width, width, 3, pad=1)
        self.bn2 = BatchNorm(f"{name}.bn2", width)
        self.conv3 = Conv2D(f"{name}.conv3", width, cout, 1)
        self.bn3 = BatchNorm(f"{name}.bn3", cout)
        if projection:
            self.short_conv = Conv2D(f"{name}.shortcut.conv", cin, cout, 1, stride=stride)
            self.short_bn = BatchNorm(f"{name}.shortcut.bn", cout)

    @property
    def kind(self):
        return "conv_block" if self.projection else "identity_block"

    def layers(self):
        out = [self.conv1, self.bn1, self.conv2, self.bn2, self.conv3, self.bn3]
        if self.projection:
            out += [self.short_conv, self.short_bn]
        return out

    def param_specs(self):
        return [s for layer in self.layers() for s in layer.param_specs()]

    def out_shape(self, in_shape):
        return self.conv3.out_shape(self.conv2.out_shape(self.conv1.out_shape(in_shape)))

    def apply(self, x, P):
        h = T.relu(self.bn1.apply(self.conv1.apply(x, P), P))
        h = T.relu(self.bn2.apply(self.conv2.apply(h, P), P))
        h = self.bn3.apply(self.conv3.apply(h, P), P)
        short = self.short_bn.apply(self.short_conv.apply(x, P), P) if self.projection else x
        return _checked(T.relu(T.add(h, short)), self.name)


class GlobalAvgPool(Node):
    def __init__(self, name="pool"):
        self.name = name

    def out_shape(self, in_shape):
        return (in_shape[0],)

    def apply(self, x, P):
        return T.global_avg_pool(x)


class Dense(Node):
    def __init__(self, name, din, dout, activation=None, is_head=False):
        self.name, self.din, self.dout = name, din, dout
        self.activation = activation
        self.is_head = is_head

    def param_specs(self):
        return [
            (f"{self.name}.weight", (self.din, self.dout), "dense_weight"),
            (f"{self.name}.bias", (self.dout,), "dense_bias"),
        ]

    def out_shape(self, in_shape):
        if tuple(in_shape) != (self.din,):
            raise ShapeError(self.name, (self.din,), in_shape)
        return (self.dout,)

    def apply(self, x, P):
        if x.data.ndim != 2 or x.shape[1] != self.din:
            raise ShapeError(self.name, (x.shape[0], self.din), x.shape)
        out = T.dense(x, P[f"{self.name}.weight"], P[f"{self.name}.bias"])
        if self.activation == "relu":
            out = T.relu(out)
        return _checked(out, self.name)


class LayerGraph:
    """Sequential graph of top-level nodes with an optional output activation.

    ``output`` is ``"sigmoid"``, ``"softmax"`` or ``None``; the final node
    produces logits and the activation is applied by :func:`forward`.
    """

    def __init__(self, input_shape, nodes, output=None, name=""):
        if output not in (None, "sigmoid", "softmax"):
            raise ValueError(f"unknown output activation {output!r}")
        self.input_shape = tuple(input_shape)
        self.nodes = list(nodes)
        self.output = output
        self.name = name
        names = [n for n, _, _ in self.param_specs()]
        if len(names) != len(set(names)):
            raise ValueError("duplicate parameter names in graph")
        shape = self.input_shape
        self.shapes = {}
        for node in self.nodes:
            shape = node.out_shape(shape)
            self.shapes[node.name] = shape
        self.output_shape = shape

    def param_specs(self):
        return [s for node in self.nodes for s in node.param_specs()]

    def node(self, name):
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def blocks(self):
        return [n for n in self.nodes if isinstance(n, Bottleneck)]

    @property
    def head_nodes(self):
        return [n for n in self.nodes if n.is_head]

    def init_params(self, seed=0, dtype=np.float32):
        """He-uniform weights, zero biases/shifts/means, unit scales/variances."""
        rng = np.random.default_rng(seed)
        store = ParameterStore()
        for name, shape, kind in self.param_specs():
            if kind == "conv_weight":
                fan_in = shape[1] * shape[2] * shape[3]
                value = rng.uniform(-1, 1, shape) * math.sqrt(6.0 / fan_in)
            elif kind == "dense_weight":
                value = rng.uniform(-1, 1, shape) * math.sqrt(6.0 / shape[0])
            elif kind in ("bn_scale", "bn_moving_var"):
                value = np.ones(shape)
            else:
                value = np.zeros(shape)
            store.add(Parameter(name, value.astype(dtype), kind))
        return store

    def run(self, params, x, track=False, taps=None, stop_after=None, calibrate=False, start_after=None):
        """Execute nodes in order and return the last output tensor.

        ``track`` enables gradient recording for trainable parameters.
        ``taps`` (a dict) receives every top-level node output by name.
        ``stop_after`` ends execution after the named node.
        ``start_after`` treats ``x`` as the output of the named node and
        resumes from the next one.
        ``calibrate`` overwrites every batch-norm moving mean/variance in
        ``params`` with the statistics of its input on this batch, in
        network order, before the layer is applied.
        """
        if not isinstance(x, T.Tensor):
            x = T.Tensor(np.asarray(x))
        nodes = self.nodes
        expected = self.input_shape
        if start_after is not None:
            idx = [n.name for n in nodes].index(start_after)
            nodes = nodes[idx + 1:]
            expected = self.shapes[start_after]
        if tuple(x.shape[1:]) != tuple(expected):
            raise ShapeError(start_after or "input", (x.shape[0],) + tuple(expected), x.shape)
        leaves = _Leaves()
        if calibrate:
            leaves.calibrate = params
        for name, shape, _ in (s for node in nodes for s in node.param_specs()):
            p = params[name]
            if tuple(p.value.shape) != tuple(shape):
                raise ShapeError(name, shape, p.value.shape)
            leaves[name] = T.Tensor(p.value, requires_grad=track and p.trainable, name=name)
        h = x
        for node in nodes:
            h = node.apply(h, leaves)
            if taps is not None:
                taps[node.name] = h.data
            if node.name == stop_after:
                break
        return h, leaves


class _Leaves(dict):
    calibrate = None


def forward(graph, params, batch, mode="eval"):
    """Head output for ``batch``: probabilities for sigmoid/softmax heads.

    Batch norm always uses the stored statistics, so ``mode`` only controls
    whether gradients are recorded (``"train"``).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    logits, _ = graph.run(params, batch, track=mode == "train")
    return _activate(graph, logits)


def _activate(graph, logits):
    if graph.output == "sigmoid":
        return _checked(T.sigmoid(logits), "head.sigmoid")
    if graph.output == "softmax":
        return _checked(T.softmax(logits), "head.softmax")
    return logits


def backward(graph, params, batch, labels, loss_kind="bce", weights=None, start_after=None):
    """Mean loss over the batch; fills ``.grad`` of trainable parameters only.

    ``start_after`` feeds ``batch`` in as the cached output of a frozen
    prefix ending at that node (see :meth:`LayerGraph.run`).
    """
    logits, leaves = graph.run(params, batch, track=True, start_after=start_after)
    labels = np.asarray(labels)
    if loss_kind == "bce":
        if logits.data.ndim != 2 or logits.shape[1] != 1:
            raise ShapeError("bce", (logits.shape[0], 1), logits.shape)
        if labels.reshape(-1).shape[0] != logits.shape[0]:
            raise ShapeError("labels", (logits.shape[0],), labels.shape)
        loss = T.bce_with_logits(logits, labels, weights)
    elif loss_kind == "cce":
        if labels.shape != logits.shape:
            raise ShapeError("labels", logits.shape, labels.shape)
        loss = T.cce_with_logits(logits, labels, weights)
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    value = float(loss.data)
    if not math.isfinite(value):
        raise NonFiniteError("loss")
    params.zero_grad()
    if loss.requires_grad:
        loss.backward()
    for name, leaf in leaves.items():
        p = params[name]
        if p.trainable:
            g = leaf.grad if leaf.grad is not None else np.zeros_like(p.value)
            if not np.isfinite(g).all():
                raise NonFiniteError(f"gradient of {name}")
            p.grad = g
    return value
