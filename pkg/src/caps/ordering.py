"""Leaf-elimination ordering with parent scores, plus the variance-sorting baseline.

The ordering loop peels off one leaf per iteration: the node whose expected
score-Jacobian diagonal is largest among the nodes still in play. Parent
scores come from how much each remaining node's diagonal rises when a node is
dropped from the data.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import Dag, Permutation, reachability
from .score import DegenerateDataError, SteinEstimator
from .synthesis import SemSpec, simulate

log = logging.getLogger(__name__)

PSCORE_MODES = ("leaf", "full")


@dataclass
class ParentScoreMatrix:
    """``p[i, j]``: strength of parent j's effect on child i (clamped at 0)."""

    p: np.ndarray
    raw: np.ndarray | None = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.raw is None:
            self.raw = self.p.copy()
        np.fill_diagonal(self.p, 0.0)
        self.p = np.maximum(self.p, 0.0)

    @property
    def d(self) -> int:
        return self.p.shape[0]


@dataclass
class OrderingResult:
    perm: Permutation
    pscore: ParentScoreMatrix
    jac_trace: list[tuple[list[int], np.ndarray]] = field(default_factory=list)

    def to_dict(self, trace: bool = True) -> dict:
        out = {
            "order": self.perm.order.tolist(),
            "pos": self.perm.pos.tolist(),
            "pscore": self.pscore.p.tolist(),
            "pscore_raw": self.pscore.raw.tolist(),
        }
        if trace:
            out["jac_trace"] = [{"nodes": nodes, "jac": jac.tolist()} for nodes, jac in self.jac_trace]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "OrderingResult":
        trace = [(t["nodes"], np.asarray(t["jac"])) for t in data.get("jac_trace", [])]
        ps = ParentScoreMatrix(np.asarray(data["pscore"]), np.asarray(data.get("pscore_raw", data["pscore"])))
        return cls(Permutation(data["pos"]), ps, trace)

    def save(self, path, trace: bool = True) -> None:
        Path(path).write_text(json.dumps(self.to_dict(trace), indent=2), encoding="utf-8")


def leaf_index(j_vec) -> int:
    """Position of the largest entry; ``np.argmax`` already returns the first on ties."""
    j_vec = np.asarray(j_vec, dtype=float)
    if j_vec.size == 0:
        raise ValueError("empty vector")
    return int(np.argmax(j_vec))


def parent_score_row(j_full, j_minus_i, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Row ``i`` of the parent-score matrix as ``j_minus_i - j_full``.

    ``j_minus_i[i]`` must already hold ``j_full[i]`` so entry i comes out 0.
    Returns (clamped row, raw row).
    """
    j_full = np.asarray(j_full, dtype=float)
    j_minus_i = np.asarray(j_minus_i, dtype=float)
    if j_full.shape != j_minus_i.shape:
        raise ValueError(f"dimension mismatch: {j_full.shape} vs {j_minus_i.shape}")
    raw = j_minus_i - j_full
    raw[i] = 0.0
    if np.any(raw < 0):
        log.debug("row %d: clamping negative parent scores %s", i, raw[raw < 0])
    return np.maximum(raw, 0.0), raw


def _check_columns(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ValueError(f"need an n x d matrix with n, d >= 2, got {X.shape}")
    const = np.flatnonzero(np.ptp(X, axis=0) == 0)
    if const.size:
        raise DegenerateDataError(f"constant columns: {const.tolist()}")
    return X


def caps_order(X, estimator=None, pscore_mode: str = "leaf") -> OrderingResult:
    """Topological order and parent scores by repeated leaf elimination.

    ``estimator(X, nodes)`` returns the expected Jacobian diagonal of the
    marginal over ``nodes`` (see ``SteinEstimator`` and ``GaussianPlugin``).

    ``pscore_mode="leaf"`` fills row l of the parent scores when l is peeled
    off, as the rise of the remaining diagonals: ``J(rest - l) - J(rest)``.
    Dropping a current leaf leaves the other conditionals intact, so this is
    exact for the expected values. ``pscore_mode="full"`` drops each node from
    the complete data and compares against the full-data diagonal; that is
    only exact for sink nodes and costs d extra estimations.
    """
    if pscore_mode not in PSCORE_MODES:
        raise ValueError(f"pscore_mode must be one of {PSCORE_MODES}")
    X = _check_columns(X)
    estimator = estimator if estimator is not None else SteinEstimator()
    d = X.shape[1]
    nodes = list(range(d))
    order_rev: list[int] = []
    trace: list[tuple[list[int], np.ndarray]] = []
    raw = np.zeros((d, d))

    j_cur = np.asarray(estimator(X, nodes), dtype=float)
    if pscore_mode == "full":
        j_all = j_cur.copy()
        for i in range(d):
            rest = [k for k in range(d) if k != i]
            j_minus = j_all.copy()
            j_minus[rest] = estimator(X, rest)
            _, raw[i] = parent_score_row(j_all, j_minus, i)

    while nodes:
        trace.append((list(nodes), j_cur.copy()))
        k = leaf_index(j_cur)
        leaf = nodes[k]
        rest = nodes[:k] + nodes[k + 1:]
        j_next = np.asarray(estimator(X, rest), dtype=float) if rest else np.zeros(0)
        if pscore_mode == "leaf":
            base = np.zeros(d)
            minus = np.zeros(d)
            base[nodes] = j_cur
            minus[nodes] = j_cur
            minus[rest] = j_next
            _, raw[leaf] = parent_score_row(base, minus, leaf)
        order_rev.append(leaf)
        nodes, j_cur = rest, j_next

    perm = Permutation.from_order(order_rev[::-1])
    return OrderingResult(perm, ParentScoreMatrix(raw.copy(), raw), trace)


def sortnregress_order(X) -> Permutation:
    """Nodes by increasing marginal variance (stable, so ties keep index order)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("need n >= 2")
    return Permutation.from_order(np.argsort(X.var(axis=0), kind="stable"))


# --- ground-truth diagnostics ------------------------------------------------


def _fd_sq_derivative(x: np.ndarray, gx: np.ndarray, half_width: int = 10) -> float:
    """Mean squared slope of a sampled smooth function via sorted local differences."""
    idx = np.argsort(x)
    xs, gs = x[idx], gx[idx]
    n = xs.size
    lo = np.clip(np.arange(n) - half_width, 0, n - 1)
    hi = np.clip(np.arange(n) + half_width, 0, n - 1)
    dx = xs[hi] - xs[lo]
    ok = dx > 0
    slope = (gs[hi][ok] - gs[lo][ok]) / dx[ok]
    return float(np.mean(slope**2))


def true_parent_scores(spec: SemSpec, n: int = 2000, rng: np.random.Generator | None = None) -> ParentScoreMatrix:
    """Ground-truth parent scores: ``w^2 / sigma_i^2`` for linear edges, and a
    Monte-Carlo estimate of ``E[(w g'(x_j))^2] / sigma_i^2`` for GP edges."""
    rng = rng if rng is not None else np.random.default_rng(0)
    d = spec.d
    var = spec.noise.variance
    p = np.zeros((d, d))
    for j, i in spec.graph.edges():
        if spec.linear[j, i]:
            p[i, j] = spec.weights[j, i] ** 2 / var[i]
    if np.any(spec.nonlinear):
        X, transforms = simulate(spec, n, rng)
        for j, i in zip(*np.nonzero(spec.nonlinear)):
            msd = _fd_sq_derivative(X[:, j], transforms[(int(j), int(i))])
            p[i, j] = spec.weights[j, i] ** 2 * msd / var[i]
    return ParentScoreMatrix(p)


def check_assumptions(spec: SemSpec, p_true: ParentScoreMatrix) -> dict[str, bool]:
    """Which of the two sufficient identifiability conditions hold for ``spec``."""
    g = spec.graph
    sigma = spec.noise.scale
    var = spec.noise.variance
    # (i): some valid order has non-decreasing noise scale, i.e. no ancestor
    # is noisier than one of its descendants
    anc = reachability(g.adj)
    cond_i = bool(np.all(sigma[None, :] >= sigma[:, None] - 1e-12, where=anc))
    # (ii): every non-leaf's total outgoing parent score clears the variance gap
    col_sum = p_true.p.sum(axis=0)
    bound = 1.0 / var.min() - 1.0 / var
    non_leaf = g.adj.any(axis=1)
    cond_ii = bool(np.all(col_sum[non_leaf] >= bound[non_leaf] - 1e-12))
    return {"cond_i": cond_i, "cond_ii": cond_ii}


def analytic_parent_scores(spec: SemSpec) -> ParentScoreMatrix:
    """Closed-form parent scores of an all-linear SEM."""
    if np.any(spec.nonlinear):
        raise ValueError("closed form needs an all-linear SEM")
    return ParentScoreMatrix((spec.weights**2 / spec.noise.variance[None, :]).T)


