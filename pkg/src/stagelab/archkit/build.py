"""Instantiate an :class:`ArchSpec` as a layer graph and enumerate its sub-blocks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numcore.graph import Bottleneck, Dense, GlobalAvgPool, LayerGraph, Stem


@dataclass(frozen=True, order=True)
class SubBlockId:
    stage: int  # 1-based stage index
    block: int  # 0-based position inside the stage
    kind: str

    @property
    def prefix(self):
        return f"stage{self.stage}.block{self.block}"


def build_graph(spec):
    """Layer graph for ``spec``: stem, bottleneck stages, global pool, head."""
    nodes = [Stem("stem", spec.input_shape[0], spec.stem_width, spec.stem_kernel)]
    cin = spec.stem_width
    for s, stage in enumerate(spec.stages, start=1):
        for b in range(stage.blocks):
            first = b == 0
            nodes.append(Bottleneck(
                f"stage{s}.block{b}", cin, stage.width, stage.out_width,
                stride=stage.stride if first else 1,
                projection=first, stage=s, index=b,
            ))
            cin = stage.out_width
    nodes.append(GlobalAvgPool("pool"))
    output = None
    if spec.head.kind != "none":
        nodes.append(Dense("head.dense", cin, spec.head.units, is_head=True))
        output = spec.head.kind
    graph = LayerGraph(spec.input_shape, nodes, output=output, name=spec.preset)
    graph.spec = spec
    return graph


def build(spec, seed=0, dtype=np.float32):
    """Graph plus a freshly initialized parameter store (all frozen)."""
    graph = build_graph(spec)
    return graph, graph.init_params(seed=seed, dtype=dtype)


def enumerate_subblocks(graph):
    """Sub-blocks in network order; "last k" is the length-k suffix."""
    return [SubBlockId(b.stage, b.index, b.kind) for b in graph.blocks]


def stage_cut(graph, stage):
    """Name of the node whose output ends ``stage`` (1-based)."""
    names = [b.name for b in graph.blocks if b.stage == stage]
    if not names:
        raise ValueError(f"graph has no stage {stage}")
    return names[-1]


def calibrate_batchnorm(graph, params, images, batch_size=None):
    """Set every batch-norm moving statistic to the data statistics it sees.

    Used to condition randomly initialized stand-in weights so that deep
    residual stacks neither explode nor vanish once batch norm is frozen.
    Statistics come from one pass over ``images`` (all of them unless
    ``batch_size`` is given, in which case only the first batch is used).
    """
    x = np.asarray(images, dtype=params.dtype)
    if batch_size is not None:
        x = x[:batch_size]
    graph.run(params, x, calibrate=True)
    return params


def surrogate_weights(spec, images, seed=0, dtype=np.float32):
    """Seeded He-uniform weights with data-calibrated batch-norm statistics.

    Stands in for generically pre-trained weights when none are supplied.
    """
    graph, params = build(spec, seed=seed, dtype=dtype)
    return graph, calibrate_batchnorm(graph, params, images)
