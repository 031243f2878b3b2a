"""Endpoint derivative estimation with a filtered Legendre expansion.

Given noisy samples of ``f`` at nodes in ``[-1, 1]`` (last node at 1), the
estimate of ``f'(1)`` is ``sum_j w_j y_j K_n(t_j)``, where ``w_j`` are
quadrature weights exact for Legendre polynomials of degree ``< 2n`` and
``K_n`` is the smoothly truncated derivative-at-1 kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

DEFAULT_KAPPA_MAX = 1e6
QUADRATURE_RESIDUAL_TOL = 1e-8
MAX_DEGREE = 64


class DegenerateNodesError(ValueError):
    pass


def legendre_eval(k: int, x):
    """``P_k(x)`` by the three-term recurrence; scalar or array ``x``."""
    if k < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    p_prev = np.ones_like(x)
    if k == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for j in range(2, k + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    return p if p.ndim else float(p)


def legendre_vandermonde(x, n_terms: int) -> np.ndarray:
    """Matrix with ``[i, k] = P_k(x_i)`` for ``k < n_terms``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((x.size, n_terms))
    if n_terms == 0:
        return out
    out[:, 0] = 1.0
    if n_terms > 1:
        out[:, 1] = x
    for k in range(2, n_terms):
        out[:, k] = ((2 * k - 1) * x * out[:, k - 1] - (k - 1) * out[:, k - 2]) / k
    return out


def _g(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_cutoff(t):
    """Even C-infinity cutoff: 1 on ``|t| <= 1/2``, 0 on ``|t| >= 1``."""
    u = np.abs(np.asarray(t, dtype=np.float64))
    v = 2.0 * u - 1.0
    a, b = _g(1.0 - v), _g(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        mid = a / (a + b)
    out = np.where(u <= 0.5, 1.0, np.where(u >= 1.0, 0.0, mid))
    return out if out.ndim else float(out)


def diff_kernel(n: int, x):
    """``K_n(h; x) = 1/2 sum_{k<n} h(k/n) k (k+1/2) (k+1) P_k(x)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    k = np.arange(n, dtype=np.float64)
    coef = 0.5 * smooth_cutoff(k / n) * k * (k + 0.5) * (k + 1.0)
    out = legendre_vandermonde(x.ravel(), n) @ coef
    return out.reshape(x.shape) if x.ndim else float(out[0])


def map_window_times(times: Sequence[float]) -> tuple[np.ndarray, float]:
    """Affinely map ``times`` onto ``[-1, 1]``; returns nodes and d/dt scale."""
    t = np.asarray(times, dtype=np.float64)
    if t.size < 2:
        raise ValueError("need at least 2 sample times")
    if not np.all(np.diff(t) > 0):
        raise ValueError("sample times must be strictly increasing")
    span = t[-1] - t[0]
    if span <= 0:
        raise ValueError("zero-length sampling span")
    nodes = 2.0 * (t - t[0]) / span - 1.0
    nodes[-1] = 1.0
    return nodes, 2.0 / span


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    degree: int
    condition: float
    residual: float

    @property
    def kernel_weights(self) -> np.ndarray:
        """``w_j K_n(t_j)``: the estimator is a dot product with these."""
        return self.weights * diff_kernel(self.degree, self.nodes)


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    degree_used: int


def _quadrature_system(nodes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    A = legendre_vandermonde(nodes, 2 * n).T
    rhs = np.zeros(2 * n)
    rhs[0] = 2.0
    return A, rhs


def quadrature_candidates(nodes, kappa_max: float = DEFAULT_KAPPA_MAX):
    """Yield ``(n, weights, condition, residual)`` for ascending ``n``."""
    nodes = np.asarray(nodes, dtype=np.float64)
    for n in range(1, MAX_DEGREE + 1):
        A, rhs = _quadrature_system(nodes, n)
        s = np.linalg.svd(A, compute_uv=False)
        cond = math.inf if s[-1] == 0 else float(s[0] / s[-1])
        w = np.linalg.lstsq(A, rhs, rcond=None)[0]
        resid = float(np.max(np.abs(A @ w - rhs)))
        yield n, w, cond, resid


def solve_quadrature(nodes, kappa_max: float = DEFAULT_KAPPA_MAX) -> QuadratureRule:
    """Quadrature weights for the largest admissible Legendre degree ``n``.

    ``n`` is admissible when the ``2n x d`` system is solvable to
    ``QUADRATURE_RESIDUAL_TOL`` with condition number at most ``kappa_max``.
    The search ascends and stops at the first inadmissible ``n``.
    """
    key = tuple(float(v) for v in np.asarray(nodes, dtype=np.float64))
    return _solve_quadrature_cached(key, float(kappa_max))


@lru_cache(maxsize=256)
def _solve_quadrature_cached(key: tuple, kappa_max: float) -> QuadratureRule:
    nodes = np.array(key)
    if nodes.size < 2:
        raise DegenerateNodesError("need at least 2 nodes")
    if np.unique(nodes).size != nodes.size:
        raise DegenerateNodesError("nodes too degenerate: duplicated node")
    best = None
    for n, w, cond, resid in quadrature_candidates(nodes, kappa_max):
        if cond > kappa_max or resid > QUADRATURE_RESIDUAL_TOL:
            break
        best = (n, w, cond, resid)
    if best is None:
        raise DegenerateNodesError("nodes too degenerate: no admissible degree")
    n, w, cond, resid = best
    nodes.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=w, degree=n, condition=cond, residual=resid)


def estimate_derivative(values, rule: QuadratureRule, scale: float = 1.0) -> DerivativeEstimate:
    y = np.asarray(values, dtype=np.float64)
    if y.shape != rule.nodes.shape:
        raise ValueError(f"expected {rule.nodes.size} values, got {y.size}")
    # the weights annihilate constants; offsetting by y[-1] makes that exact in floating point
    return DerivativeEstimate(float(scale * (rule.kernel_weights @ (y - y[-1]))), rule.degree)


def linear_predict(window, horizon: float = 5.0, kappa_max: float = DEFAULT_KAPPA_MAX) -> float:
    """Last reading plus ``horizon`` minutes times the estimated slope."""
    x = np.asarray(window.x, dtype=np.float64)
    times = window.times if window.times else window.t_last - 5.0 * np.arange(x.size)[::-1]
    nodes, scale = map_window_times(times)
    rule = solve_quadrature(nodes, kappa_max)
    slope = estimate_derivative(x, rule, scale).value
    return float(x[-1] + horizon * slope)


def linear_predict_batch(windows, horizon: float = 5.0,
                         kappa_max: float = DEFAULT_KAPPA_MAX) -> np.ndarray:
    """``linear_predict`` over many windows, one quadrature per time geometry."""
    out = np.empty(len(windows))
    groups: dict[tuple, list[int]] = {}
    for i, w in enumerate(windows):
        rel = tuple(t - w.times[0] for t in w.times) if w.times else None
        groups.setdefault(rel, []).append(i)
    for rel, idx in groups.items():
        if rel is None:
            for i in idx:
                out[i] = linear_predict(windows[i], horizon, kappa_max)
            continue
        nodes, scale = map_window_times(rel)
        kw = solve_quadrature(nodes, kappa_max).kernel_weights * scale
        X = np.array([windows[i].x for i in idx], dtype=np.float64)
        out[idx] = X[:, -1] + horizon * ((X - X[:, -1:]) @ kw)
    return out
