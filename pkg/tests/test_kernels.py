"""Compiled kernels agree with the numpy fallback and with direct definitions."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stagelab.numcore import _kernels_py as py
from stagelab.numcore import kernels

try:
    from stagelab.numcore import _kernels as cy
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")

geometry = st.tuples(
    st.integers(1, 3),  # N
    st.integers(1, 3),  # C
    st.integers(1, 8),  # H
    st.integers(1, 8),  # W
    st.sampled_from([1, 3, 5]),  # k
    st.integers(1, 3),  # stride
    st.integers(0, 2),  # pad
).filter(lambda g: g[2] + 2 * g[6] >= g[4] and g[3] + 2 * g[6] >= g[4])


def conv_direct(x, w, stride, pad):
    """Naive loop convolution used as an independent oracle."""
    n, c, h, wd = x.shape
    co, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = (h + 2 * pad - k) // stride + 1, (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, co, ho, wo))
    for i in range(ho):
        for j in range(wo):
            patch = xp[:, :, i * stride:i * stride + k, j * stride:j * stride + k]
            out[:, :, i, j] = np.tensordot(patch, w, axes=([1, 2, 3], [1, 2, 3]))
    return out


@given(geometry, st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_im2col_matches_direct_convolution(g, seed):
    n, c, h, w, k, s, p = g
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c, h, w))
    wt = rng.standard_normal((2, c, k, k))
    cols = py.im2col(x, k, k, s, p)
    ho, wo = (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1
    out = (cols @ wt.reshape(2, -1).T).reshape(n, ho, wo, 2).transpose(0, 3, 1, 2)
    np.testing.assert_allclose(out, conv_direct(x, wt, s, p), atol=1e-10)


@given(geometry, st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_col2im_is_adjoint_of_im2col(g, seed):
    n, c, h, w, k, s, p = g
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c, h, w))
    cols = py.im2col(x, k, k, s, p)
    y = rng.standard_normal(cols.shape)
    back = py.col2im(y, n, c, h, w, k, k, s, p)
    assert np.isclose((cols * y).sum(), (x * back).sum())


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@given(g=geometry, seed=st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_backends_agree(dtype, g, seed):
    n, c, h, w, k, s, p = g
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c, h, w)).astype(dtype)
    a, b = cy.im2col(x, k, k, s, p), py.im2col(x, k, k, s, p)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(
        cy.col2im(a, n, c, h, w, k, k, s, p), py.col2im(b, n, c, h, w, k, k, s, p), rtol=1e-6, atol=1e-6
    )


@needs_ext
@given(st.integers(1, 9), st.integers(1, 9), st.integers(0, 2**31), st.booleans())
@settings(max_examples=60, deadline=None)
def test_maxpool_backends_agree(h, w, seed, ties):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3, h, w))
    if ties:
        x = np.round(x)  # many equal values: first maximum must win in both
    out_c, arg_c = cy.maxpool_forward(x, 3, 2, 1)
    out_p, arg_p = py.maxpool_forward(x, 3, 2, 1)
    np.testing.assert_array_equal(out_c, out_p)
    np.testing.assert_array_equal(arg_c, arg_p)
    g = rng.standard_normal(out_c.shape)
    np.testing.assert_allclose(cy.maxpool_backward(g, arg_c, h, w), py.maxpool_backward(g, arg_p, h, w))


def test_maxpool_matches_direct_definition(rng):
    x = rng.standard_normal((1, 2, 7, 6))
    out, _ = py.maxpool_forward(x, 3, 2, 1)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), constant_values=-np.inf)
    for i in range(out.shape[2]):
        for j in range(out.shape[3]):
            want = xp[:, :, 2 * i:2 * i + 3, 2 * j:2 * j + 3].max(axis=(2, 3))
            np.testing.assert_array_equal(out[:, :, i, j], want)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    if cy is not None:
        assert kernels.BACKEND == "cython"


def test_environment_forces_fallback():
    env = dict(os.environ, STAGELAB_KERNELS="python")
    out = subprocess.run(
        [sys.executable, "-c", "from stagelab.numcore import BACKEND; print(BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
