"""Finite-difference checks for every differentiable op, in float64."""
import zlib

import numpy as np
import pytest

from stagelab.numcore import tensor as T
from stagelab.numcore.graph import BN_EPS

from gradcheck import TOL, check

TRIALS = 20


def away_from_zero(rng, shape, gap=0.05):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < gap, np.sign(x + 1e-12) * gap, x)


def distinct(rng, shape):
    """Values with pairwise gaps far larger than the FD step (no pooling ties)."""
    n = int(np.prod(shape))
    return (rng.permutation(n) * 0.01 + rng.uniform(0, 0.001, n)).reshape(shape)


CASES = {
    "add": lambda r: (T.add, [r.standard_normal((3, 4)), r.standard_normal((3, 4))]),
    "matmul": lambda r: (T.matmul, [r.standard_normal((3, 5)), r.standard_normal((5, 2))]),
    "relu": lambda r: (T.relu, [away_from_zero(r, (4, 6))]),
    "sigmoid": lambda r: (T.sigmoid, [r.standard_normal((4, 3)) * 3]),
    "softmax": lambda r: (T.softmax, [r.standard_normal((4, 5)) * 2]),
    "dense": lambda r: (T.dense, [r.standard_normal((4, 6)), r.standard_normal((6, 3)), r.standard_normal(3)]),
    "global_avg_pool": lambda r: (T.global_avg_pool, [r.standard_normal((2, 3, 4, 5))]),
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_elementwise_and_dense(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for _ in range(TRIALS):
        op, arrays = CASES[name](rng)
        assert check(op, arrays, rng) < TOL


def test_add_rejects_mismatched_shapes():
    from stagelab.errors import ShapeError

    with pytest.raises(ShapeError):
        T.add(T.Tensor(np.zeros((3, 4))), T.Tensor(np.zeros(4)))


def test_conv2d():
    rng = np.random.default_rng(0)
    for _ in range(TRIALS):
        cin, cout = rng.integers(1, 4, size=2)
        k = int(rng.choice([1, 3]))
        stride = int(rng.integers(1, 3))
        pad = int(rng.integers(0, k // 2 + 1))
        h, w = rng.integers(k, 7, size=2)
        x = rng.standard_normal((2, cin, h, w))
        wt = rng.standard_normal((cout, cin, k, k))
        b = rng.standard_normal(cout)
        op = lambda x, w, b: T.conv2d(x, w, b, stride, pad)
        assert check(op, [x, wt, b], rng) < TOL


def test_conv2d_stem_geometry():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1, 2, 9, 9))
    wt = rng.standard_normal((3, 2, 7, 7))
    b = rng.standard_normal(3)
    assert check(lambda x, w, b: T.conv2d(x, w, b, 2, 3), [x, wt, b], rng) < TOL


def test_batch_norm():
    rng = np.random.default_rng(2)
    for _ in range(TRIALS):
        c = int(rng.integers(1, 5))
        x = rng.standard_normal((3, c, 3, 4))
        gamma, beta = rng.standard_normal(c), rng.standard_normal(c)
        mean, var = rng.standard_normal(c), rng.uniform(0.5, 2.0, c)
        op = lambda x, g, be, m, v: T.batch_norm(x, g, be, m, v, BN_EPS)
        assert check(op, [x, gamma, beta, mean, var], rng, wrt=(0, 1, 2)) < TOL


def test_max_pool():
    rng = np.random.default_rng(3)
    for _ in range(TRIALS):
        h, w = rng.integers(3, 9, size=2)
        x = distinct(rng, (2, 2, h, w))
        assert check(lambda x: T.max_pool2d(x, 3, 2, 1), [x], rng) < TOL


def test_bce_with_logits():
    rng = np.random.default_rng(4)
    for _ in range(TRIALS):
        n = int(rng.integers(1, 9))
        logits = rng.standard_normal((n, 1)) * 3
        labels = rng.integers(0, 2, n)
        weights = rng.uniform(0.5, 2.0, n)
        assert check(lambda z: T.bce_with_logits(z, labels), [logits], rng) < TOL
        assert check(lambda z: T.bce_with_logits(z, labels, weights), [logits], rng) < TOL


def test_cce_with_logits():
    rng = np.random.default_rng(5)
    for _ in range(TRIALS):
        n, k = int(rng.integers(1, 7)), int(rng.integers(2, 5))
        logits = rng.standard_normal((n, k)) * 2
        onehot = np.eye(k)[rng.integers(0, k, n)]
        weights = rng.uniform(0.5, 2.0, n)
        assert check(lambda z: T.cce_with_logits(z, onehot), [logits], rng) < TOL
        assert check(lambda z: T.cce_with_logits(z, onehot, weights), [logits], rng) < TOL


def test_bottleneck_block_end_to_end():
    """Composite check through a projection sub-block, parameters included."""
    from stagelab.numcore import Bottleneck
    from stagelab.numcore.params import ParameterStore

    rng = np.random.default_rng(6)
    block = Bottleneck("b", 3, 2, 4, stride=2, projection=True)
    specs = block.param_specs()
    for _ in range(5):
        values = {
            n: (rng.uniform(0.5, 1.5, s) if kind == "bn_moving_var" else rng.standard_normal(s) * 0.5)
            for n, s, kind in specs
        }
        names = [n for n, _, kind in specs if kind in ("conv_weight", "conv_bias")]
        x = rng.standard_normal((2, 3, 5, 5))

        def op(x, *ps):
            leaves = {n: T.Tensor(values[n]) for n, _, _ in specs}
            leaves.update(dict(zip(names, ps)))
            return block.apply(x, leaves)

        arrays = [x] + [values[n] for n in names]
        assert check(op, arrays, rng) < TOL


def test_stable_logits_do_not_overflow():
    z = T.Tensor(np.array([[1000.0], [-1000.0]]), requires_grad=True)
    loss = T.bce_with_logits(z, np.array([1, 0]))
    loss.backward()
    assert np.isfinite(loss.data).all() and np.isfinite(z.grad).all()
