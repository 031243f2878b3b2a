"""Compiled and pure-Python kernel backends must agree."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bgpredict import kernels
from bgpredict.predega import ZoneTables

C = pytest.importorskip("bgpredict._kernels", reason="extension not built")
P = kernels.python_backend


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


@given(st.lists(st.floats(-1e3, 1e3), min_size=0, max_size=50), st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=100, deadline=None)
def test_iir(values, b, a):
    x = np.asarray(values, dtype=np.float64)
    x0 = float(x[0]) if x.size else 0.0
    np.testing.assert_allclose(C.iir_first_order(x, 0.7, b, a, x0, x0),
                               P.iir_first_order(x, 0.7, b, a, x0, x0), rtol=1e-13, atol=1e-9)


@given(st.integers(2, 40), st.integers(1, 8), st.floats(0.01, 1e4), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_gaussian_weights(n, dim, eps, seed):
    pts = np.random.default_rng(seed).normal(scale=30, size=(n, dim))
    np.testing.assert_allclose(C.gaussian_weights(pts, eps), P.gaussian_weights(pts, eps),
                               rtol=1e-12, atol=1e-300)


@given(st.integers(0, 2**32 - 1), st.integers(1, 300))
@settings(max_examples=60, deadline=None)
def test_classify_batch(seed, n):
    rng = np.random.default_rng(seed)
    ref = rng.uniform(20, 420, n)
    pred = np.where(rng.random(n) < 0.5, ref + rng.normal(0, 40, n), rng.uniform(0, 450, n))
    # hit exact boundaries now and then
    ref[rng.random(n) < 0.1] = 70.0
    pred[rng.random(n) < 0.1] = 180.0
    pr, rr = rng.normal(0, 2, (2, n))
    defined = (rng.random(n) < 0.8).astype(np.uint8)
    t = ZoneTables.default()
    args = (pred, ref, pr, rr, defined, t.point_params, t.rate_params, t.combination, t.endpoint)
    for a, b in zip(C.classify_batch(*args), P.classify_batch(*args)):
        assert np.array_equal(np.asarray(a), np.asarray(b))
