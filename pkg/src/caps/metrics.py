"""Structure-recovery metrics: SHD, SID, directed-edge F1 and order divergence."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .graph import CycleError, Dag, Permutation, is_acyclic, reachability

CSV_FIELDS = ("dataset", "method", "seed", "shd", "sid", "f1", "d_top", "wall_time_s")


@dataclass
class MetricsReport:
    shd: int
    sid: int
    f1: float
    d_top: int | None = None
    wall_time_s: float = 0.0
    dataset: str = ""
    method: str = ""
    seed: int | None = None

    def to_row(self) -> dict:
        row = asdict(self)
        return {k: row[k] for k in CSV_FIELDS}


def _adj(g) -> np.ndarray:
    return g.adj if isinstance(g, Dag) else np.asarray(g, dtype=bool)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def shd(a_true, a_est, reversal_cost: int = 1) -> int:
    """Pairs that differ: missing or extra edges cost 1, reversals ``reversal_cost``."""
    t, e = _adj(a_true), _adj(a_est)
    _same_shape(t, e)
    iu = np.triu_indices(t.shape[0], k=1)
    t_fwd, t_bwd = t[iu], t.T[iu]
    e_fwd, e_bwd = e[iu], e.T[iu]
    t_any, e_any = t_fwd | t_bwd, e_fwd | e_bwd
    add_del = int(np.sum(t_any != e_any))
    reversed_ = int(np.sum(t_any & e_any & ((t_fwd != e_fwd) | (t_bwd != e_bwd))))
    return add_del + reversal_cost * reversed_


def f1(a_true, a_est) -> float:
    t, e = _adj(a_true), _adj(a_est)
    _same_shape(t, e)
    n_t, n_e = int(t.sum()), int(e.sum())
    if n_t == 0 and n_e == 0:
        return 1.0
    tp = int((t & e).sum())
    if tp == 0:
        return 0.0
    precision, recall = tp / n_e, tp / n_t
    return 2 * precision * recall / (precision + recall)


def order_divergence(p: Permutation, a_true) -> int:
    """Number of true edges whose parent sits after its child in ``p``."""
    t = _adj(a_true)
    pos = p.pos if isinstance(p, Permutation) else np.asarray(p)
    if pos.size != t.shape[0]:
        raise ValueError(f"dimension mismatch: {pos.size} vs {t.shape[0]}")
    return int(np.sum(t & (pos[:, None] > pos[None, :])))


# --- SID --------------------------------------------------------------------


def _d_connected(adj: np.ndarray, x: int, z: set[int]) -> set[int]:
    """Nodes d-connected to ``x`` given ``z`` (Bayes-ball reachability)."""
    # ancestors of z, needed to decide whether colliders are open
    anc_z = set(z)
    stack = list(z)
    while stack:
        v = stack.pop()
        for u in np.flatnonzero(adj[:, v]):
            u = int(u)
            if u not in anc_z:
                anc_z.add(u)
                stack.append(u)
    # direction "up": arrived from a child; "down": arrived from a parent
    visited: set[tuple[int, str]] = set()
    reached: set[int] = set()
    queue = deque([(x, "up")])
    while queue:
        v, direction = queue.popleft()
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if v not in z:
            reached.add(v)
        if direction == "up" and v not in z:
            queue.extend((int(u), "up") for u in np.flatnonzero(adj[:, v]))
            queue.extend((int(c), "down") for c in np.flatnonzero(adj[v]))
        elif direction == "down":
            if v not in z:
                queue.extend((int(c), "down") for c in np.flatnonzero(adj[v]))
            if v in anc_z:
                queue.extend((int(u), "up") for u in np.flatnonzero(adj[:, v]))
    reached.discard(x)
    return reached


def sid(a_true, a_est) -> int:
    """Structural intervention distance of ``a_est`` with respect to ``a_true``.

    A pair (i, j) counts when adjusting for the estimated parents of i does not
    give the correct interventional distribution of j in the true graph.
    """
    t, e = _adj(a_true), _adj(a_est)
    _same_shape(t, e)
    if not (is_acyclic(t) and is_acyclic(e)):
        raise CycleError("SID needs two DAGs")
    d = t.shape[0]
    reach = reachability(t)
    reach_refl = reach | np.eye(d, dtype=bool)
    count = 0
    for i in range(d):
        z = set(np.flatnonzero(e[:, i]).tolist())
        z_mask = e[:, i]
        for j in range(d):
            if j == i:
                continue
            if j in z:
                count += bool(reach[i, j])
                continue
            # nodes other than i lying on a directed path i -> ... -> j
            on_path = reach[i] & reach_refl[:, j]
            forb = reach_refl[on_path].any(axis=0)
            if np.any(forb & z_mask):
                count += 1
                continue
            g = t.copy()
            g[i, on_path] = False  # drop first edges of causal paths
            if j in _d_connected(g, i, z):
                count += 1
    return count


MAX_ORACLE_NODES = 6


def _simple_paths(t: np.ndarray, i: int, j: int):
    """All simple paths i ... j in the skeleton, as node lists."""
    d = t.shape[0]
    skel = t | t.T
    out = []

    def walk(path):
        v = path[-1]
        if v == j:
            out.append(list(path))
            return
        for u in range(d):
            if skel[v, u] and u not in path:
                path.append(u)
                walk(path)
                path.pop()

    walk([i])
    return out


def _directed_path_exists(t: np.ndarray, a: int, b: int) -> bool:
    return any(all(t[p[k], p[k + 1]] for k in range(len(p) - 1)) for p in _simple_paths(t, a, b))


def sid_oracle(a_true, a_est) -> int:
    """Brute-force SID by enumerating every path; exponential, for d <= 6."""
    t, e = _adj(a_true), _adj(a_est)
    _same_shape(t, e)
    d = t.shape[0]
    if d > MAX_ORACLE_NODES:
        raise ValueError(f"oracle limited to d <= {MAX_ORACLE_NODES}, got {d}")
    if not (is_acyclic(t) and is_acyclic(e)):
        raise CycleError("SID needs two DAGs")
    desc = [[b for b in range(d) if b != a and _directed_path_exists(t, a, b)] for a in range(d)]
    count = 0
    for i in range(d):
        z = {int(k) for k in np.flatnonzero(e[:, i])}
        for j in range(d):
            if j == i:
                continue
            if j in z:
                count += j in desc[i]
                continue
            paths = _simple_paths(t, i, j)
            causal = [p for p in paths if all(t[p[k], p[k + 1]] for k in range(len(p) - 1))]
            forb = set()
            for p in causal:
                for w in p[1:]:
                    forb.add(w)
                    forb.update(desc[w])
            if z & forb:
                count += 1
                continue
            bad = False
            for p in paths:
                if p in causal:
                    continue
                blocked = False
                for k in range(1, len(p) - 1):
                    v = p[k]
                    collider = t[p[k - 1], v] and t[p[k + 1], v]
                    if collider:
                        if v not in z and not (set(desc[v]) & z):
                            blocked = True
                    elif v in z:
                        blocked = True
                    if blocked:
                        break
                if not blocked:
                    bad = True
                    break
            count += bad
    return count


def evaluate(a_true, a_est, perm: Permutation | None = None, wall_time_s: float = 0.0, **labels) -> MetricsReport:
    return MetricsReport(
        shd=shd(a_true, a_est),
        sid=sid(a_true, a_est),
        f1=f1(a_true, a_est),
        d_top=None if perm is None else order_divergence(perm, a_true),
        wall_time_s=wall_time_s,
        **labels,
    )
