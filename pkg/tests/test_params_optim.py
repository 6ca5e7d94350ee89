import numpy as np
import pytest

from stagelab.errors import MissingGradientError
from stagelab.numcore import AdamState, Parameter, ParameterStore, adam_step


def store(rng):
    return ParameterStore([
        Parameter("w", rng.standard_normal((3, 2)), "dense_weight"),
        Parameter("b", rng.standard_normal(2), "dense_bias"),
        Parameter("bn.gamma", np.ones(2), "bn_scale"),
    ])


def adam_oracle(value, grads, lr, b1=0.9, b2=0.999, eps=1e-7):
    m = np.zeros_like(value)
    v = np.zeros_like(value)
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        value = value - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return value


def test_adam_matches_reference(rng):
    params = store(rng)
    params.set_trainable(["w"])
    start = params["w"].value.copy()
    grads = [rng.standard_normal((3, 2)) for _ in range(5)]
    state = AdamState(1e-3)
    for g in grads:
        params["w"].grad = g
        adam_step(state, params)
    np.testing.assert_allclose(params["w"].value, adam_oracle(start, grads, 1e-3), rtol=1e-12)
    assert state.t == 5


def test_first_step_is_learning_rate_sized(rng):
    params = store(rng)
    params.set_trainable(["b"])
    before = params["b"].value.copy()
    params["b"].grad = np.array([3.0, -0.2])
    adam_step(AdamState(0.01), params)
    np.testing.assert_allclose(before - params["b"].value, [0.01, -0.01], rtol=1e-5)


def test_frozen_parameters_untouched(rng):
    params = store(rng)
    params.set_trainable(["w"])
    snap = params.snapshot()
    params["w"].grad = np.ones((3, 2))
    params["b"].grad = np.ones(2)  # a stray gradient on a frozen parameter is ignored
    adam_step(AdamState(0.1), params)
    assert params.changed_since(snap) == {"w"}


def test_missing_gradient_is_an_error(rng):
    params = store(rng)
    params.set_trainable(["w", "b"])
    params["w"].grad = np.ones((3, 2))
    with pytest.raises(MissingGradientError, match="'b'"):
        adam_step(AdamState(0.1), params)


def test_moments_dropped_when_frozen(rng):
    params = store(rng)
    state = AdamState(0.1)
    params.set_trainable(["w", "b"])
    params["w"].grad, params["b"].grad = np.ones((3, 2)), np.ones(2)
    adam_step(state, params)
    params.set_trainable(["w"])
    params["w"].grad = np.ones((3, 2))
    adam_step(state, params)
    assert set(state.m) == {"w"}


def test_batch_norm_cannot_be_trainable(rng):
    with pytest.raises(ValueError, match="batch-norm"):
        store(rng).set_trainable(["bn.gamma"])
    with pytest.raises(ValueError):
        Parameter("x", np.ones(1), "bn_scale", trainable=True)


def test_unknown_names_rejected(rng):
    with pytest.raises(KeyError):
        store(rng).set_trainable(["nope"])


def test_store_basics(rng):
    params = store(rng)
    assert len(params) == 3 and "w" in params
    assert params.total_size() == 6 + 2 + 2
    copy = params.astype(np.float32)
    assert copy.dtype == np.float32 and params.dtype == np.float64
    copy["w"].value[...] = 0
    assert params["w"].value.any()
