"""From (order, parent scores) to a DAG: pre-prune, additive-model prune, supplement."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.stats
from scipy.interpolate import BSpline

from .graph import Dag, full_dag_from_permutation, reachability
from .ordering import OrderingResult, ParentScoreMatrix

log = logging.getLogger(__name__)

AVG_MODES = ("existing_edges", "all_entries")


class RegressionError(ValueError):
    """Additive regression design is too degenerate to test covariates."""


@dataclass
class PostprocessConfig:
    lam: float = 50.0
    prune_p_threshold: float = 1e-3
    basis_size: int = 10
    avg_mode: str = "existing_edges"
    # separate rigor for each step; None falls back to ``lam``
    pre_prune_lam: float | None = None
    supplement_lam: float | None = None
    use_pre_prune: bool = True
    use_supplement: bool = True

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.prune_p_threshold < 1:
            raise ValueError("p threshold must lie in (0, 1)")
        if self.avg_mode not in AVG_MODES:
            raise ValueError(f"avg_mode must be one of {AVG_MODES}")

    @property
    def pre_lam(self) -> float:
        return self.lam if self.pre_prune_lam is None else self.pre_prune_lam

    @property
    def sup_lam(self) -> float:
        return self.lam if self.supplement_lam is None else self.supplement_lam


def _scores(pscore) -> np.ndarray:
    return pscore.p if isinstance(pscore, ParentScoreMatrix) else np.asarray(pscore, dtype=float)


def pre_prune(a_init: Dag, pscore, lam: float) -> Dag:
    """Drop candidate j -> i when ``P[i, j] < max(P[i, :]) / lam``."""
    P = _scores(pscore)
    threshold = P.max(axis=1, keepdims=True) / lam
    weak = P < threshold  # weak[i, j]: j is a weak parent of i
    return Dag(a_init.adj & ~weak.T, check=False)


# --- additive-model pruning -------------------------------------------------


def spline_basis(x: np.ndarray, basis_size: int = 10, degree: int = 3) -> np.ndarray:
    """Centred cubic B-spline columns (one dropped) with knots at quantiles."""
    x = np.asarray(x, dtype=float)
    n_inner = basis_size - degree - 1
    lo, hi = x.min(), x.max()
    inner = np.unique(np.quantile(x, np.linspace(0, 1, n_inner + 2)[1:-1]))
    inner = inner[(inner > lo) & (inner < hi)]
    if hi <= lo or np.unique(x).size <= degree + 1:
        return (x - x.mean())[:, None]
    t = np.r_[[lo] * (degree + 1), inner, [hi] * (degree + 1)]
    B = BSpline.design_matrix(np.clip(x, lo, hi), t, degree).toarray()
    B = B[:, :-1]  # the full set sums to one, which would duplicate the intercept
    return B - B.mean(axis=0)


def _rss(design: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid), int(rank)


def covariate_pvalues(X, child: int, parents, basis_size: int = 10) -> dict[int, float]:
    """Group F-test p-value of each parent's block in an additive fit of the child."""
    X = np.asarray(X, dtype=float)
    parents = [int(p) for p in parents]
    n = X.shape[0]
    y = X[:, child]
    linear_only = n < 5 * basis_size * len(parents)
    blocks = []
    for p in parents:
        if linear_only:
            blocks.append((X[:, p] - X[:, p].mean())[:, None])
        else:
            blocks.append(spline_basis(X[:, p], basis_size))
    ones = np.ones((n, 1))
    full = np.hstack([ones] + blocks)
    rss_full, rank_full = _rss(full, y)
    dof = n - rank_full
    if dof <= 0:
        raise RegressionError(f"node {child}: design rank {rank_full} leaves no residual dof")
    out = {}
    for k, p in enumerate(parents):
        reduced = np.hstack([ones] + blocks[:k] + blocks[k + 1:])
        rss_red, rank_red = _rss(reduced, y)
        q = rank_full - rank_red
        if q <= 0:
            # block is collinear with the others: it adds nothing
            out[p] = 1.0
            continue
        F = max(rss_red - rss_full, 0.0) / q / (rss_full / dof) if rss_full > 0 else np.inf
        out[p] = float(scipy.stats.f.sf(F, q, dof))
    return out


def cam_prune(a: Dag, X, cfg: PostprocessConfig | None = None) -> Dag:
    """Keep j -> i only if x_j's block is significant in the additive model of x_i."""
    cfg = cfg if cfg is not None else PostprocessConfig()
    adj = a.adj.copy()
    for i in range(a.d):
        parents = np.flatnonzero(a.adj[:, i])
        if parents.size == 0:
            continue
        pvals = covariate_pvalues(X, i, parents, cfg.basis_size)
        for j, pv in pvals.items():
            if pv >= cfg.prune_p_threshold:
                adj[j, i] = False
    return Dag(adj, check=False)


# --- edge supplement --------------------------------------------------------


def supplement_threshold(a: Dag, pscore, lam: float, avg_mode: str = "existing_edges") -> float:
    P = _scores(pscore)
    on_edges = P.T[a.adj]  # P[i, j] for every present edge j -> i
    if avg_mode == "existing_edges":
        if on_edges.size == 0:
            return np.inf
        return lam * float(on_edges.mean())
    if avg_mode == "all_entries":
        if on_edges.size == 0:
            return np.inf
        return lam * float(on_edges.sum()) / P.size
    raise ValueError(f"avg_mode must be one of {AVG_MODES}")


def edge_supplement(a: Dag, pscore, lam: float, avg_mode: str = "existing_edges") -> Dag:
    """Greedily add high-score edges j -> i, strongest first, while staying acyclic."""
    P = _scores(pscore)
    tau = supplement_threshold(a, P, lam, avg_mode)
    adj = a.adj.copy()
    cand = (P > tau) & ~adj.T
    np.fill_diagonal(cand, False)
    rows, cols = np.nonzero(cand)
    # descending score, ties by (i, j)
    order = np.lexsort((cols, rows, -P[rows, cols]))
    reach = reachability(adj)
    for k in order:
        i, j = int(rows[k]), int(cols[k])
        if reach[i, j] or i == j:  # j -> i would close a cycle
            continue
        adj[j, i] = True
        # everything reaching j now also reaches i and what i reaches
        src = reach[:, j].copy()
        src[j] = True
        dst = reach[i].copy()
        dst[i] = True
        reach |= np.outer(src, dst)
    return Dag(adj, check=False)


@dataclass
class PostprocessTrace:
    initial: Dag
    pre_pruned: Dag
    pruned: Dag
    final: Dag
    removed_pre: list = field(default_factory=list)
    removed_prune: list = field(default_factory=list)
    added: list = field(default_factory=list)

    @property
    def n_candidates(self) -> int:
        """Candidate parents handed to the additive-model pruning."""
        return self.pre_pruned.n_edges

    def to_dict(self) -> dict:
        return {
            "removed_by_pre_prune": self.removed_pre,
            "removed_by_prune": self.removed_prune,
            "added_by_supplement": self.added,
        }


def _diff(a: Dag, b: Dag) -> list:
    return [[int(i), int(j)] for i, j in zip(*np.nonzero(a.adj & ~b.adj))]


def postprocess_with_trace(X, ord_result: OrderingResult, cfg: PostprocessConfig | None = None) -> PostprocessTrace:
    cfg = cfg if cfg is not None else PostprocessConfig()
    P = ord_result.pscore
    initial = full_dag_from_permutation(ord_result.perm)
    pre = pre_prune(initial, P, cfg.pre_lam) if cfg.use_pre_prune else initial
    pruned = cam_prune(pre, X, cfg)
    final = edge_supplement(pruned, P, cfg.sup_lam, cfg.avg_mode) if cfg.use_supplement else pruned
    return PostprocessTrace(
        initial, pre, pruned, final,
        removed_pre=_diff(initial, pre),
        removed_prune=_diff(pre, pruned),
        added=_diff(final, pruned),
    )


def postprocess(X, ord_result: OrderingResult, cfg: PostprocessConfig | None = None) -> Dag:
    return postprocess_with_trace(X, ord_result, cfg).final
