"""Minimal dense-tensor engine with reverse-mode differentiation."""
from .graph import (
    BatchNorm,
    Bottleneck,
    Conv2D,
    Dense,
    GlobalAvgPool,
    LayerGraph,
    Stem,
    backward,
    forward,
)
from .kernels import BACKEND
from .optim import AdamState, adam_step
from .params import BN_KINDS, KINDS, Parameter, ParameterStore
from .tensor import DTYPES, Tensor

__all__ = [
    "AdamState", "BACKEND", "BN_KINDS", "BatchNorm", "Bottleneck", "Conv2D", "DTYPES",
    "Dense", "GlobalAvgPool", "KINDS", "LayerGraph", "Parameter", "ParameterStore",
    "Stem", "Tensor", "adam_step", "backward", "forward",
]
