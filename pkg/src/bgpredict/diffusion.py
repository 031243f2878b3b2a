"""Diffusion-geometry regression over a fixed point cloud.

A Gaussian affinity graph over all windows gives a Laplacian whose low
eigenvectors act as an orthonormal function basis on the cloud. A predictor
is fit from training points by solving an underdetermined quadrature system
for weights ``W_j`` and evaluating the spectrally filtered kernel sum::

    sigma(x) = sum_j W_j y_j sum_{k < k_used} h(lam_k / lam) phi_k(x) phi_k(x_j)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist

from . import kernels
from .legendre import smooth_cutoff

MODES = ("random_walk", "unnormalized")
DEFAULT_KAPPA_MAX = 1e6
DEFAULT_K_MAX = 50
SUMMABILITY_RESIDUAL_TOL = 1e-8


class DegenerateCloudError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    index: tuple[Hashable, ...] = ()

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ValueError("a point cloud needs at least 2 points in a 2-d array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        index = tuple(self.index) if self.index else tuple(range(pts.shape[0]))
        if len(index) != pts.shape[0]:
            raise ValueError("index length does not match number of points")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return self.points.shape[0]


def build_weight_matrix(cloud: PointCloud | np.ndarray, epsilon: float) -> np.ndarray:
    """Dense ``exp(-|y_i - y_j|^2 / epsilon)``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    return kernels.gaussian_weights(np.ascontiguousarray(pts, dtype=np.float64), float(epsilon))


def choose_epsilon(cloud: PointCloud | np.ndarray, seed: int = 0, max_points: int = 2000) -> float:
    """Median squared pairwise distance over a uniform subsample.

    When more than half the pairs coincide, the median over distinct pairs
    is used instead so the bandwidth stays positive.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if pts.shape[0] < 2:
        raise DegenerateCloudError("degenerate cloud: fewer than 2 points")
    if pts.shape[0] > max_points:
        rng = np.random.default_rng(seed)
        pts = pts[np.sort(rng.choice(pts.shape[0], size=max_points, replace=False))]
    d2 = pdist(pts, "sqeuclidean")
    positive = d2[d2 > 0]
    if positive.size == 0:
        raise DegenerateCloudError("degenerate cloud: all points identical")
    eps = float(np.median(d2))
    return eps if eps > 0 else float(np.median(positive))


@dataclass(frozen=True)
class Laplacian:
    """Symmetric operator handed to the eigensolver.

    For ``random_walk`` this is ``I - D^-1/2 W D^-1/2``, the symmetric
    conjugate of ``I - D^-1 W``; for ``unnormalized`` it is ``D - W``.
    """

    mode: str
    matrix: np.ndarray
    degrees: np.ndarray


def build_laplacian(weights: np.ndarray, mode: str = "random_walk") -> Laplacian:
    if mode not in MODES:
        raise ValueError(f"unknown Laplacian mode {mode!r}; expected one of {MODES}")
    W = np.asarray(weights, dtype=np.float64)
    deg = W.sum(axis=1)
    if np.any(deg <= 0):
        raise DegenerateCloudError("zero row sum in weight matrix")
    if mode == "unnormalized":
        L = np.diag(deg) - W
    else:
        s = 1.0 / np.sqrt(deg)
        L = -(W * s[:, None]) * s[None, :]
        L[np.diag_indices_from(L)] += 1.0
    L = 0.5 * (L + L.T)
    deg.setflags(write=False)
    return Laplacian(mode=mode, matrix=L, degrees=deg)


@dataclass(frozen=True)
class DiffusionModel:
    """Low eigenpairs of the cloud Laplacian.

    ``eigenvectors[:, k]`` is ``phi_k`` sampled at every point, normalized so
    that ``sum_i mu_i phi_j(i) phi_k(i) = delta_jk`` with ``mu`` the degree
    measure (random walk) or the uniform measure (unnormalized). ``phi_0``
    is the constant 1 in both modes.
    """

    epsilon: float
    mode: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    measure: np.ndarray = field(repr=False)

    @property
    def n_points(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def k_max(self) -> int:
        return self.eigenvalues.size


def _fix_signs(vecs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > tol * max(1.0, np.abs(col).max()))
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    return vecs


def _align_null_space(vecs: np.ndarray, vals: np.ndarray, laplacian: Laplacian,
                      tol: float = 1e-12) -> np.ndarray:
    """Rotate a repeated zero eigenspace (disconnected graph) so column 0 is the constant mode."""
    null = int(np.sum(vals <= tol * max(1.0, float(np.abs(vals).max()))))
    if null < 2:
        return vecs
    if laplacian.mode == "random_walk":
        v0 = np.sqrt(laplacian.degrees)
    else:
        v0 = np.ones(laplacian.degrees.size)
    v0 = v0 / np.linalg.norm(v0)
    block = vecs[:, :null]
    rest = np.linalg.svd(block - np.outer(v0, v0 @ block), full_matrices=False)[0]
    vecs[:, 0] = v0
    vecs[:, 1:null] = rest[:, :null - 1]
    return vecs


def eigendecompose(laplacian: Laplacian, k_max: int | None = None, epsilon: float = math.nan) -> DiffusionModel:
    n = laplacian.degrees.size
    k = min(n, DEFAULT_K_MAX) if k_max is None else int(k_max)
    if not 1 <= k <= n:
        raise ValueError(f"k_max must lie in [1, {n}], got {k}")
    try:
        vals, vecs = scipy.linalg.eigh(laplacian.matrix, subset_by_index=[0, k - 1], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"symmetric eigensolver failed on {n}x{n} Laplacian: {exc}") from exc
    vecs = _align_null_space(np.array(vecs), vals, laplacian)
    if laplacian.mode == "random_walk":
        total = float(laplacian.degrees.sum())
        phi = vecs / np.sqrt(laplacian.degrees)[:, None] * math.sqrt(total)
        measure = laplacian.degrees / total
    else:
        phi = vecs * math.sqrt(n)
        measure = np.full(n, 1.0 / n)
    phi = _fix_signs(phi)
    for a in (vals, phi, measure):
        a.setflags(write=False)
    return DiffusionModel(epsilon=float(epsilon), mode=laplacian.mode, eigenvalues=vals,
                          eigenvectors=phi, measure=measure)


def build_diffusion_model(cloud: PointCloud, epsilon: float | None = None, mode: str = "random_walk",
                          k_max: int | None = None, seed: int = 0) -> DiffusionModel:
    eps = choose_epsilon(cloud, seed=seed) if epsilon is None else float(epsilon)
    W = build_weight_matrix(cloud, eps)
    return eigendecompose(build_laplacian(W, mode), k_max, epsilon=eps)


@dataclass(frozen=True)
class SummabilityWeights:
    train_ids: np.ndarray
    weights: np.ndarray
    lam: float
    k_used: int
    condition: float
    residual: float
    filter: np.ndarray


def _spectral_cutoff(eigenvalues: np.ndarray, k_used: int) -> float:
    if k_used < eigenvalues.size:
        return 0.5 * float(eigenvalues[k_used - 1] + eigenvalues[k_used])
    return 2.0 * float(eigenvalues[k_used - 1])


def _filter(eigenvalues: np.ndarray, k_used: int, lam: float) -> np.ndarray:
    lk = np.clip(eigenvalues[:k_used], 0.0, None)
    if lam <= 0:
        return np.ones(k_used)
    return np.asarray(smooth_cutoff(lk / lam), dtype=np.float64).reshape(k_used)


def solve_summability_weights(model: DiffusionModel, train_ids: Sequence[int],
                              kappa_max: float = DEFAULT_KAPPA_MAX,
                              k_max: int | None = None) -> SummabilityWeights:
    """Minimum-norm quadrature weights over ``train_ids`` for the largest well-posed basis.

    ``k_used`` grows from 1 while the ``k_used x |train|`` system keeps
    condition number ``<= kappa_max`` and residual ``<= 1e-8``.
    """
    ids = np.asarray(train_ids, dtype=np.intp)
    if ids.size == 0:
        raise ValueError("training set is empty")
    top = model.k_max if k_max is None else min(int(k_max), model.k_max)
    Phi = model.eigenvectors[ids, :top]
    best = None
    for k in range(1, top + 1):
        A = Phi[:, :k].T
        rhs = np.zeros(k)
        rhs[0] = 1.0
        u, s, vt = np.linalg.svd(A, full_matrices=False)
        cond = math.inf if s[-1] == 0 or k > ids.size else float(s[0] / s[-1])
        if cond > kappa_max:
            break
        w = vt.T @ ((u.T @ rhs) / s)
        resid = float(np.max(np.abs(A @ w - rhs)))
        if resid > SUMMABILITY_RESIDUAL_TOL:
            break
        best = (k, w, cond, resid)
    if best is None:
        raise DegenerateCloudError("summability system ill-posed even for the constant eigenfunction")
    k, w, cond, resid = best
    lam = _spectral_cutoff(model.eigenvalues, k)
    return SummabilityWeights(train_ids=ids, weights=w, lam=lam, k_used=k, condition=cond,
                              residual=resid, filter=_filter(model.eigenvalues, k, lam))


def evaluate_sigma(model: DiffusionModel, sw: SummabilityWeights, targets,
                   point_ids: Sequence[int] | None = None) -> np.ndarray:
    """Filtered-kernel approximation at ``point_ids`` (all points when None)."""
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != sw.train_ids.shape:
        raise ValueError(f"expected {sw.train_ids.size} targets, got {y.size}")
    k = sw.k_used
    coef = sw.filter * (model.eigenvectors[sw.train_ids, :k].T @ (sw.weights * y))
    rows = model.eigenvectors[:, :k] if point_ids is None else model.eigenvectors[np.asarray(point_ids), :k]
    return rows @ coef


def check_parsimony(k_used: int, limit: int = 8) -> bool:
    """Warn when more eigenfunctions were accepted than the expected handful."""
    if k_used > limit:
        warnings.warn(
            f"summability accepted {k_used} eigenfunctions (> {limit}); CGM clouds usually "
            "stay within about 5, so the bandwidth or kappa_max may be too loose",
            stacklevel=2,
        )
        return False
    return True
