"""Kernel Stein estimators of the score and of the diagonal of its Jacobian.

All estimators use the RBF kernel ``k(a, b) = exp(-|a - b|^2 / (2 h^2))`` with
the bandwidth ``h`` set by the median heuristic unless given explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist


class DegenerateDataError(ValueError):
    """Raised when the data carry no spread (e.g. identical rows, constant columns)."""


class SolveError(np.linalg.LinAlgError):
    """Raised when the regularized kernel system cannot be solved."""


MAX_BANDWIDTH_ROWS = 2000


def median_bandwidth(X, rng: np.random.Generator | None = None) -> float:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("median heuristic needs at least two rows")
    if X.shape[0] > MAX_BANDWIDTH_ROWS:
        rng = rng if rng is not None else np.random.default_rng(0)
        X = X[rng.choice(X.shape[0], MAX_BANDWIDTH_ROWS, replace=False)]
    h = float(np.median(pdist(X)))
    if h <= 0:
        raise DegenerateDataError("median pairwise distance is zero")
    return h


@dataclass
class KernelMatrix:
    k: np.ndarray
    bandwidth: float


def rbf_kernel(X, bandwidth: float) -> KernelMatrix:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    sq = np.sum(X**2, axis=1)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(dist2, 0.0)
    return KernelMatrix(np.exp(-dist2 / (2.0 * bandwidth**2)), bandwidth)


def rbf_grad(X, km: KernelMatrix) -> np.ndarray:
    """Tensor ``g[a, b, j] = d k(x_a, x_b) / d x_{a,j}``; O(n^2 d) memory, for small n."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    diff = X[:, None, :] - X[None, :, :]
    return -diff / km.bandwidth**2 * km.k[:, :, None]


def rbf_grad2(X, km: KernelMatrix) -> np.ndarray:
    """Tensor ``g[a, b, j] = d^2 k(x_a, x_b) / d x_{a,j}^2``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    diff = X[:, None, :] - X[None, :, :]
    h2 = km.bandwidth**2
    return (-1.0 / h2 + diff**2 / h2**2) * km.k[:, :, None]


def _kernel_sums(X, km: KernelMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Row sums over b of the first and second x_a-derivatives, without n x n x d tensors."""
    K, h2 = km.k, km.bandwidth**2
    rowsum = K.sum(axis=1)[:, None]
    KX = K @ X
    KX2 = K @ X**2
    grad = -(X * rowsum - KX) / h2
    sqdiff = X**2 * rowsum - 2.0 * X * KX + KX2
    grad2 = (-rowsum + sqdiff / h2) / h2
    return grad, grad2


def _factor(K: np.ndarray, eta: float):
    A = K + eta * np.eye(K.shape[0])
    try:
        cho = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
        return lambda B: scipy.linalg.cho_solve(cho, B, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    # symmetric-indefinite fallback
    try:
        lu = scipy.linalg.lu_factor(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolveError(f"kernel system singular at eta={eta:g}") from exc
    if np.any(np.abs(np.diag(lu[0])) < np.finfo(float).tiny):
        raise SolveError(f"kernel system singular at eta={eta:g}")
    return lambda B: scipy.linalg.lu_solve(lu, B, check_finite=False)


def _prepare(X, eta, bandwidth):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("need n >= 2 samples")
    if eta <= 0:
        raise ValueError("eta must be positive")
    h = median_bandwidth(X) if bandwidth is None else float(bandwidth)
    return X, rbf_kernel(X, h)


def stein_score(X, eta: float = 0.01, bandwidth: float | None = None) -> np.ndarray:
    """Stein estimate of ``grad log p`` at every sample, shape (n, d)."""
    X, km = _prepare(X, eta, bandwidth)
    grad, _ = _kernel_sums(X, km)
    solve = _factor(km.k, eta)
    return solve(grad)


@dataclass
class HessDiagEstimate:
    per_sample: np.ndarray  # (n, d): d s_j / d x_j at each sample
    mean: np.ndarray  # (d,)


def stein_hess_diag(X, eta: float = 0.01, bandwidth: float | None = None) -> HessDiagEstimate:
    """Second-order Stein estimate of the diagonal of the score's Jacobian."""
    X, km = _prepare(X, eta, bandwidth)
    grad, grad2 = _kernel_sums(X, km)
    solve = _factor(km.k, eta)
    sol = solve(np.hstack([grad, grad2]))
    d = X.shape[1]
    G, second = sol[:, :d], sol[:, d:]
    H = second - G**2
    return HessDiagEstimate(per_sample=H, mean=H.mean(axis=0))


@dataclass
class SteinEstimator:
    """Expected Jacobian diagonal from data; the default estimator for ordering.

    Called with the full data matrix and the node ids to keep; returns one value
    per kept node. The bandwidth is recomputed on every column subset unless fixed.
    """

    eta: float = 0.01
    bandwidth: float | None = None

    def __call__(self, X, nodes) -> np.ndarray:
        sub = np.asarray(X, dtype=float)[:, list(nodes)]
        if np.any(np.ptp(sub, axis=0) == 0):
            raise DegenerateDataError("constant column in data")
        return stein_hess_diag(sub, self.eta, self.bandwidth).mean


@dataclass
class GaussianPlugin:
    """Exact expected Jacobian diagonal of a Gaussian with covariance ``cov``.

    For any marginal over ``nodes`` the Jacobian of the score is the negative
    marginal precision, so the result is ``-diag(inv(cov[nodes, nodes]))``.
    The data argument is ignored; this stands in for the Stein estimator in tests.
    """

    cov: np.ndarray

    def __call__(self, X, nodes) -> np.ndarray:
        nodes = list(nodes)
        sub = np.asarray(self.cov)[np.ix_(nodes, nodes)]
        return -np.diag(np.linalg.inv(sub))

    @classmethod
    def from_sem(cls, spec) -> "GaussianPlugin":
        from .synthesis import linear_covariance

        return cls(linear_covariance(spec))
