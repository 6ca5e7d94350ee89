"""Copy archived weights into a (possibly truncated) graph by name and shape."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TransfusionError


@dataclass
class TransfusionReport:
    copied: int
    copied_names: list = field(default_factory=list)
    unused_archive: list = field(default_factory=list)  # in archive, not in graph
    untouched_graph: list = field(default_factory=list)  # in graph, not in archive

    def __int__(self):
        return self.copied


def transfuse(archive, graph, params):
    """Overwrite graph parameters with same-named archive tensors.

    A name match with a different shape is an error, raised before any
    value is written.
    """
    graph_names = [name for name, _, _ in graph.param_specs()]
    in_graph = set(graph_names)
    tensors = archive.tensors()
    matched = []
    for name, value in tensors.items():
        if name not in in_graph:
            continue
        target = params[name].value
        if value.shape != target.shape:
            raise TransfusionError(
                f"{name}: archive shape {list(value.shape)} != graph shape {list(target.shape)}"
            )
        matched.append(name)
    for name in matched:
        np.copyto(params[name].value, tensors[name], casting="unsafe")
    matched_set = set(matched)
    return TransfusionReport(
        copied=len(matched),
        copied_names=matched,
        unused_archive=[n for n in tensors if n not in in_graph],
        untouched_graph=[n for n in graph_names if n not in matched_set],
    )
