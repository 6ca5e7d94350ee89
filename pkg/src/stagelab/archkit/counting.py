"""Closed-form parameter accounting.

Counts come from layer hyper-parameters, not from instantiated tensors:
conv = kh*kw*Cin*Cout + Cout, batch norm = 4*C, dense = D*k + k.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..numcore.graph import BatchNorm, Bottleneck, Conv2D, Dense, Stem


@dataclass
class ParamCountReport:
    total: int
    trainable: int
    per_layer: dict = field(default_factory=dict)  # layer -> (total, trainable)

    def __post_init__(self):
        if self.trainable > self.total:
            raise ValueError("trainable count exceeds total")


def _leaf_layers(graph):
    for node in graph.nodes:
        if isinstance(node, Stem):
            yield from (node.conv, node.bn)
        elif isinstance(node, Bottleneck):
            yield from node.layers()
        elif isinstance(node, (Conv2D, BatchNorm, Dense)):
            yield node


def closed_form_sizes(graph):
    """Scalar count per parameter name, from layer hyper-parameters."""
    sizes = {}
    for layer in _leaf_layers(graph):
        n = layer.name
        if isinstance(layer, Conv2D):
            sizes[f"{n}.weight"] = layer.k * layer.k * layer.cin * layer.cout
            sizes[f"{n}.bias"] = layer.cout
        elif isinstance(layer, BatchNorm):
            for stat in ("gamma", "beta", "moving_mean", "moving_var"):
                sizes[f"{n}.{stat}"] = layer.channels
        else:
            sizes[f"{n}.weight"] = layer.din * layer.dout
            sizes[f"{n}.bias"] = layer.dout
    return sizes


def count_params(graph, selector=None):
    """Total and trainable scalar counts.

    ``selector`` is anything with ``resolve(graph)`` (see
    :mod:`stagelab.schedule`) or an explicit collection of parameter names;
    ``None`` means nothing is trainable.
    """
    if selector is None:
        names = frozenset()
    elif hasattr(selector, "resolve"):
        names = frozenset(selector.resolve(graph))
    else:
        names = frozenset(selector)
    sizes = closed_form_sizes(graph)
    unknown = names - sizes.keys()
    if unknown:
        raise KeyError(f"selector names not in graph: {sorted(unknown)[:5]}")
    per_layer = {}
    for name, size in sizes.items():
        layer = name.rsplit(".", 1)[0]
        tot, tr = per_layer.get(layer, (0, 0))
        per_layer[layer] = (tot + size, tr + (size if name in names else 0))
    total = sum(sizes.values())
    trainable = sum(sizes[n] for n in names)
    return ParamCountReport(total, trainable, per_layer)
