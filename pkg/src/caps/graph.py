"""DAG container, random graph generators and order/reachability helpers."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class CycleError(ValueError):
    """Raised when an operation that needs a DAG receives a cyclic graph."""


@dataclass(frozen=True, eq=False)
class Dag:
    """Directed acyclic graph; ``adj[i, j]`` means an edge ``i -> j``."""

    adj: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        adj = np.array(self.adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if self.check:
            if np.any(np.diag(adj)):
                raise CycleError("self-loop in adjacency")
            if not is_acyclic(adj):
                raise CycleError("adjacency contains a directed cycle")
        adj.setflags(write=False)
        object.__setattr__(self, "adj", adj)

    @property
    def d(self) -> int:
        return self.adj.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adj.sum())

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adj))]

    def parents(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[:, i])

    def children(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[i])

    @classmethod
    def from_edges(cls, d: int, edges) -> "Dag":
        adj = np.zeros((d, d), dtype=bool)
        for i, j in edges:
            adj[i, j] = True
        return cls(adj)

    @classmethod
    def empty(cls, d: int) -> "Dag":
        return cls(np.zeros((d, d), dtype=bool))

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return self.adj.shape == other.adj.shape and bool(np.array_equal(self.adj, other.adj))

    def __hash__(self):
        return hash((self.d, self.adj.tobytes()))


@dataclass(frozen=True, eq=False)
class Permutation:
    """Node order; ``pos[i]`` is the 0-based position of node ``i``."""

    pos: np.ndarray

    def __post_init__(self):
        pos = np.array(self.pos, dtype=int)
        if pos.ndim != 1 or not np.array_equal(np.sort(pos), np.arange(pos.size)):
            raise ValueError(f"not a permutation of 0..{pos.size - 1}: {pos.tolist()}")
        pos.setflags(write=False)
        object.__setattr__(self, "pos", pos)

    @property
    def d(self) -> int:
        return self.pos.size

    @property
    def order(self) -> np.ndarray:
        """Nodes listed from first to last position."""
        return np.argsort(self.pos, kind="stable")

    @classmethod
    def from_order(cls, order) -> "Permutation":
        order = np.asarray(order, dtype=int)
        pos = np.empty_like(order)
        pos[order] = np.arange(order.size)
        return cls(pos)

    def __eq__(self, other):
        if not isinstance(other, Permutation):
            return NotImplemented
        return bool(np.array_equal(self.pos, other.pos))

    def __hash__(self):
        return hash(self.pos.tobytes())


def is_acyclic(adj) -> bool:
    adj = np.asarray(adj, dtype=bool)
    indeg = adj.sum(axis=0).astype(int)
    stack = list(np.flatnonzero(indeg == 0))
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        for v in np.flatnonzero(adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    return seen == adj.shape[0]


def topological_sort(g: Dag) -> Permutation:
    """Kahn's algorithm; among available nodes the lowest index goes first."""
    adj = g.adj
    indeg = adj.sum(axis=0).astype(int)
    heap = [int(i) for i in np.flatnonzero(indeg == 0)]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in np.flatnonzero(adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, int(v))
    if len(order) != g.d:
        raise CycleError("graph has a cycle; no topological order")
    return Permutation.from_order(order)


def reachability(adj) -> np.ndarray:
    """Boolean matrix R with R[i, j] true iff a directed path i -> ... -> j exists."""
    adj = np.asarray(adj, dtype=bool)
    d = adj.shape[0]
    reach = adj.copy()
    for k in range(d):  # Warshall
        reach |= np.outer(reach[:, k], reach[k])
    return reach


def descendants(g: Dag, i: int) -> set[int]:
    seen: set[int] = set()
    stack = [i]
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(g.adj[u]):
            v = int(v)
            if v not in seen:
                seen.add(v)
                stack.append(v)
    seen.discard(i)
    return seen


def ancestors(g: Dag, i: int) -> set[int]:
    return descendants(Dag(g.adj.T, check=False), i)


def full_dag_from_permutation(p: Permutation) -> Dag:
    pos = p.pos
    return Dag(pos[:, None] < pos[None, :], check=False)


def sample_er(d: int, avg_degree_factor: float, rng: np.random.Generator) -> Dag:
    """Erdos-Renyi DAG with expected ``avg_degree_factor * d`` edges."""
    if d < 2:
        raise ValueError("need d >= 2")
    p = min(1.0, avg_degree_factor * d / (d * (d - 1) / 2))
    perm = rng.permutation(d)
    upper = np.triu(rng.random((d, d)) < p, k=1)
    adj = np.zeros((d, d), dtype=bool)
    adj[np.ix_(perm, perm)] = upper
    return Dag(adj, check=False)


def sample_sf(d: int, avg_degree_factor: float, rng: np.random.Generator) -> Dag:
    """Barabasi-Albert DAG; each arriving node attaches to ``m`` earlier nodes.

    Edges point from the earlier node to the newcomer, so hubs end up as ancestors.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    m = max(1, int(round(avg_degree_factor)))
    adj = np.zeros((d, d), dtype=bool)
    degree = np.zeros(d)
    for new in range(1, d):
        k = min(m, new)
        weights = degree[:new] + 1.0  # +1 so isolated early nodes stay reachable
        targets = rng.choice(new, size=k, replace=False, p=weights / weights.sum())
        adj[targets, new] = True
        degree[targets] += 1
        degree[new] += k
    return Dag(adj, check=False)


# --- I/O -------------------------------------------------------------------


def write_edge_list(g: Dag, path) -> None:
    lines = [f"# d={g.d}"] + [f"{i} {j}" for i, j in g.edges()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_list(path) -> Dag:
    d = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("d="):
                d = int(body[2:])
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if d is None:
        d = 1 + max((max(e) for e in edges), default=-1)
    return Dag.from_edges(d, edges)


def write_adjacency_csv(g: Dag, path) -> None:
    np.savetxt(path, g.adj.astype(int), fmt="%d", delimiter=",")


def read_adjacency_csv(path) -> Dag:
    adj = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.isin(adj, (0, 1)).all():
        raise ValueError(f"{path}: adjacency entries must be 0 or 1")
    return Dag(adj.astype(bool))


def read_dag(path) -> Dag:
    """Read either format; ``.csv`` files are treated as dense adjacency."""
    if str(path).lower().endswith(".csv"):
        return read_adjacency_csv(path)
    return read_edge_list(path)
