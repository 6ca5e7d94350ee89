"""Adam with bias correction, restricted to trainable parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingGradientError


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    t: int = 0
    m: dict = field(default_factory=dict, repr=False)
    v: dict = field(default_factory=dict, repr=False)


def adam_step(state, params):
    """Apply one Adam update to every trainable parameter in ``params``.

    Frozen parameters are never read or written. Moments are created lazily
    for trainable names and dropped for names that are no longer trainable.
    """
    names = params.trainable_names()
    for name in names:
        if params[name].grad is None:
            raise MissingGradientError(f"trainable parameter {name!r} has no gradient")
    for stale in set(state.m) - set(names):
        del state.m[stale], state.v[stale]

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for name in names:
        p = params[name]
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        step = state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
        p.value -= step.astype(p.value.dtype, copy=False)
    return params
