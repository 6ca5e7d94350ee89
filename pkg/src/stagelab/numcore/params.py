"""Named parameters and the store that enforces the freeze contract."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = (
    "conv_weight", "conv_bias",
    "bn_scale", "bn_shift", "bn_moving_mean", "bn_moving_var",
    "dense_weight", "dense_bias",
)
BN_KINDS = frozenset({"bn_scale", "bn_shift", "bn_moving_mean", "bn_moving_var"})


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    kind: str
    trainable: bool = False
    grad: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"{self.name}: unknown parameter kind {self.kind!r}")
        if self.kind in BN_KINDS and self.trainable:
            raise ValueError(f"{self.name}: batch-norm parameters are never trainable")

    @property
    def size(self):
        return int(self.value.size)


class ParameterStore:
    """Ordered mapping of parameter name to :class:`Parameter`."""

    def __init__(self, params=()):
        self._params = {}
        for p in params:
            self.add(p)

    def add(self, param):
        if param.name in self._params:
            raise ValueError(f"duplicate parameter name {param.name!r}")
        self._params[param.name] = param

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def trainable_names(self):
        return [n for n, p in self._params.items() if p.trainable]

    @property
    def dtype(self):
        first = next(iter(self._params.values()), None)
        return first.value.dtype if first is not None else np.dtype(np.float32)

    def set_trainable(self, names):
        """Make exactly ``names`` trainable; everything else is frozen."""
        names = set(names)
        unknown = names - self._params.keys()
        if unknown:
            raise KeyError(f"unknown parameters: {sorted(unknown)[:5]}")
        for name, p in self._params.items():
            if name in names and p.kind in BN_KINDS:
                raise ValueError(f"{name}: batch-norm parameters are never trainable")
            p.trainable = name in names
            p.grad = None

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def snapshot(self):
        return {n: p.value.copy() for n, p in self._params.items()}

    def changed_since(self, snapshot):
        """Names whose values are not bitwise equal to ``snapshot``."""
        return {
            n for n, p in self._params.items()
            if p.value.tobytes() != snapshot[n].tobytes()
        }

    def astype(self, dtype):
        """Copy of the store with every value cast to ``dtype``."""
        return ParameterStore(
            Parameter(p.name, p.value.astype(dtype), p.kind, p.trainable) for p in self
        )

    def copy(self):
        return self.astype(self.dtype)

    def total_size(self, names=None):
        if names is None:
            return sum(p.size for p in self)
        return sum(self._params[n].size for n in names)
