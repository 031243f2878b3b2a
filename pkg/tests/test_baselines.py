import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bgpredict.baselines import KrrFitError, gaussian_kernel, krr_fit, krr_predict


def test_single_pair_closed_form():
    model = krr_fit([[100.0] * 7], [150.0], sigma=100, gamma=1e-4)
    assert krr_predict(model, [100.0] * 7) == pytest.approx(150.0 / (1 + 1e-4), rel=1e-14)


def test_large_gamma_shrinks_to_zero():
    rng = np.random.default_rng(0)
    x = rng.uniform(50, 300, (30, 7))
    model = krr_fit(x, rng.uniform(50, 300, 30), gamma=1e6)
    assert np.abs(krr_predict(model, x)).max() < 1e-3


def test_duplicates_solvable():
    x = np.tile([[120.0] * 7], (5, 1))
    model = krr_fit(x, [100, 110, 120, 130, 140])
    assert np.isfinite(model.coefficients).all()


def test_far_point_decays():
    model = krr_fit(np.full((3, 7), 100.0), [100, 120, 140], sigma=10)
    assert abs(krr_predict(model, [5000.0] * 7)) < 1e-12


def test_constant_targets_dense_cover():
    rng = np.random.default_rng(1)
    x = rng.uniform(60, 250, (300, 7))
    model = krr_fit(x, np.full(300, 120.0), gamma=1e-6)
    np.testing.assert_allclose(krr_predict(model, x), 120.0, rtol=0.01)


def test_interpolation_limit():
    rng = np.random.default_rng(2)
    x = rng.uniform(60, 250, (20, 7))
    y = rng.uniform(60, 250, 20)
    model = krr_fit(x, y, gamma=1e-8)
    assert abs(krr_predict(model, x[3]) - y[3]) <= 1e-4


def test_kernel_matrix_properties():
    rng = np.random.default_rng(3)
    x = rng.uniform(60, 250, (25, 7))
    K = gaussian_kernel(x, x, 100.0)
    np.testing.assert_allclose(K, K.T, atol=1e-15)
    np.testing.assert_allclose(np.diag(K), 1.0)
    gamma, m = 1e-4, 25
    assert np.linalg.eigvalsh(K + gamma * m * np.eye(m)).min() >= gamma * m * (1 - 1e-9)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0))
@settings(max_examples=25, deadline=None)
def test_lipschitz(seed, step):
    rng = np.random.default_rng(seed)
    x = rng.uniform(60, 250, (15, 7))
    model = krr_fit(x, rng.uniform(60, 250, 15))
    # |d/dx k(x, x_i)| <= exp(-1/2) / sigma for the Gaussian
    lip = np.abs(model.coefficients).sum() * np.exp(-0.5) / model.sigma
    p = rng.uniform(60, 250, 7)
    delta = rng.normal(size=7)
    delta *= step / np.linalg.norm(delta)
    assert abs(krr_predict(model, p) - krr_predict(model, p + delta)) <= lip * step * (1 + 1e-9)


def test_bad_arguments():
    with pytest.raises(ValueError):
        krr_fit(np.ones((2, 7)), [1.0])
    with pytest.raises(ValueError):
        krr_fit(np.ones((2, 7)), [1.0, 2.0], sigma=0)
    with pytest.raises(KrrFitError):
        krr_fit(np.ones((2, 7)), [1.0, 2.0], gamma=1e-300, scale_by_m=False)
