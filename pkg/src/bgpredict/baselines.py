"""Tikhonov-regularized Gaussian kernel least squares (kernel ridge regression)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

DEFAULT_SIGMA = 100.0
DEFAULT_GAMMA = 1e-4


class KrrFitError(RuntimeError):
    pass


def gaussian_kernel(a, b, sigma: float) -> np.ndarray:
    """``exp(-|a_i - b_j|^2 / (2 sigma^2))``."""
    return np.exp(-cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean") / (2.0 * sigma * sigma))


@dataclass(frozen=True)
class KrrModel:
    inputs: np.ndarray
    coefficients: np.ndarray
    sigma: float
    gamma: float


def krr_fit(x, y, sigma: float = DEFAULT_SIGMA, gamma: float = DEFAULT_GAMMA,
            scale_by_m: bool = True) -> KrrModel:
    """Solve ``(K + gamma * M * I) c = y`` by Cholesky; ``M`` = number of pairs."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] < 1 or X.shape[0] != t.size:
        raise ValueError("need at least one training pair and matching targets")
    if sigma <= 0 or gamma <= 0:
        raise ValueError("sigma and gamma must be positive")
    m = X.shape[0]
    K = gaussian_kernel(X, X, sigma)
    K[np.diag_indices(m)] += gamma * (m if scale_by_m else 1.0)
    try:
        c = scipy.linalg.cho_solve(scipy.linalg.cho_factor(K, lower=True), t)
    except np.linalg.LinAlgError as exc:
        raise KrrFitError(f"kernel system not positive definite ({m} pairs): {exc}") from exc
    X.setflags(write=False)
    return KrrModel(X, c, float(sigma), float(gamma))


def krr_predict(model: KrrModel, x) -> np.ndarray | float:
    """Predictions at one input (returns float) or at rows of a 2-d array."""
    a = np.asarray(x, dtype=np.float64)
    out = gaussian_kernel(a, model.inputs, model.sigma) @ model.coefficients
    return float(out[0]) if a.ndim == 1 else out
