"""Additive-noise SEMs with a tunable mix of linear and GP-drawn nonlinear edges."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .graph import Dag, topological_sort

NOISE_KINDS = ("gaussian", "gumbel", "laplace")
EULER_GAMMA = 0.5772156649015329


class FactorizationError(np.linalg.LinAlgError):
    """Kernel matrix plus jitter is not positive definite; increase the jitter."""


@dataclass
class NoiseSpec:
    """Per-node additive noise; ``scale[i]`` is the standard deviation of node i's noise."""

    kind: str
    scale: np.ndarray
    variance_mode: str = "equal"

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        self.scale = np.asarray(self.scale, dtype=float)
        if np.any(self.scale <= 0):
            raise ValueError("noise scales must be positive")
        if self.variance_mode == "equal" and np.ptp(self.scale) != 0:
            raise ValueError("equal variance mode needs identical scales")

    @classmethod
    def equal(cls, d: int, kind: str = "gaussian", variance: float = 1.0) -> "NoiseSpec":
        return cls(kind, np.full(d, np.sqrt(variance)), "equal")

    @classmethod
    def uniform(cls, d: int, rng: np.random.Generator, lo: float = 0.4, hi: float = 0.8,
                kind: str = "gaussian") -> "NoiseSpec":
        """Variances drawn independently from U(lo, hi)."""
        return cls(kind, np.sqrt(rng.uniform(lo, hi, size=d)), "uniform")

    @property
    def variance(self) -> np.ndarray:
        return self.scale**2

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """(n, d) noise draws, zero mean, column variance ``scale**2``."""
        d = self.scale.size
        if self.kind == "gaussian":
            return rng.normal(size=(n, d)) * self.scale
        if self.kind == "gumbel":
            beta = self.scale * np.sqrt(6.0) / np.pi
            return rng.gumbel(size=(n, d)) * beta - EULER_GAMMA * beta
        b = self.scale / np.sqrt(2.0)
        return rng.laplace(size=(n, d)) * b

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.scale.tolist(), "variance_mode": self.variance_mode}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        return cls(data["kind"], np.asarray(data["scale"]), data.get("variance_mode", "explicit"))


@dataclass
class SemSpec:
    """Weighted DAG with a mechanism flag per edge.

    ``linear[i, j]`` is meaningful only where ``graph.adj[i, j]``; nonlinear
    edges get a fresh GP draw each time a dataset is generated.
    """

    graph: Dag
    weights: np.ndarray
    linear: np.ndarray
    noise: NoiseSpec
    bandwidth: float = 1.0
    jitter: float = 1e-8
    seed: int | None = None
    # slot for a joint-over-parents GP mechanism; only "edge" is implemented
    mechanism_mode: str = field(default="edge")

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.linear = np.asarray(self.linear, dtype=bool) & self.graph.adj
        if self.mechanism_mode != "edge":
            raise NotImplementedError(f"mechanism_mode={self.mechanism_mode!r}")

    @property
    def d(self) -> int:
        return self.graph.d

    @property
    def nonlinear(self) -> np.ndarray:
        return self.graph.adj & ~self.linear

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "edges": [list(e) for e in self.graph.edges()],
            "weights": [float(self.weights[i, j]) for i, j in self.graph.edges()],
            "linear": [bool(self.linear[i, j]) for i, j in self.graph.edges()],
            "noise": self.noise.to_dict(),
            "bandwidth": self.bandwidth,
            "jitter": self.jitter,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SemSpec":
        d = int(data["d"])
        g = Dag.from_edges(d, [tuple(e) for e in data["edges"]])
        w = np.zeros((d, d))
        lin = np.zeros((d, d), dtype=bool)
        for (i, j), wij, lij in zip(data["edges"], data["weights"], data["linear"]):
            w[i, j] = wij
            lin[i, j] = lij
        return cls(g, w, lin, NoiseSpec.from_dict(data["noise"]),
                   bandwidth=data.get("bandwidth", 1.0), jitter=data.get("jitter", 1e-8),
                   seed=data.get("seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SemSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def sample_sem(g: Dag, linear_proportion: float, noise: NoiseSpec, rng: np.random.Generator,
               seed: int | None = None) -> SemSpec:
    if not 0.0 <= linear_proportion <= 1.0:
        raise ValueError("linear_proportion must lie in [0, 1]")
    d = g.d
    mag = rng.uniform(0.1, 1.0, size=(d, d))
    sign = np.where(rng.random((d, d)) < 0.5, -1.0, 1.0)
    weights = np.where(g.adj, mag * sign, 0.0)
    linear = g.adj & (rng.random((d, d)) < linear_proportion)
    return SemSpec(g, weights, linear, noise, seed=seed)


def gp_sample(inputs, bandwidth: float = 1.0, jitter: float = 1e-8,
              rng: np.random.Generator | None = None) -> np.ndarray:
    """One draw of a zero-mean GP with unit-amplitude RBF kernel at ``inputs``."""
    x = np.asarray(inputs, dtype=float).ravel()
    if x.size < 1:
        raise ValueError("need at least one input")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    K = np.exp(-((x[:, None] - x[None, :]) ** 2) / (2.0 * bandwidth**2))
    K[np.diag_indices_from(K)] += jitter
    try:
        L = scipy.linalg.cholesky(K, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"RBF kernel not positive definite at jitter={jitter:g}") from exc
    return L @ rng.standard_normal(x.size)


def simulate(spec: SemSpec, n: int, rng: np.random.Generator):
    """Ancestral sampling. Returns data and the per-edge transform values ``g_{j->i}(x_j)``."""
    if n < 1:
        raise ValueError("need n >= 1")
    d = spec.d
    eps = spec.noise.sample(n, rng)
    X = np.zeros((n, d))
    transforms: dict[tuple[int, int], np.ndarray] = {}
    for i in topological_sort(spec.graph).order:
        acc = np.zeros(n)
        for j in spec.graph.parents(i):
            if spec.linear[j, i]:
                g = X[:, j]
            else:
                g = gp_sample(X[:, j], spec.bandwidth, spec.jitter, rng)
            transforms[(int(j), int(i))] = g
            acc += spec.weights[j, i] * g
        X[:, i] = acc + eps[:, i]
    return X, transforms


def generate_dataset(spec: SemSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n x d observational sample from ``spec``."""
    return simulate(spec, n, rng)[0]


def linear_covariance(spec: SemSpec) -> np.ndarray:
    """Covariance of a purely linear SEM: (I - W^T)^{-1} D (I - W^T)^{-T}."""
    if np.any(spec.nonlinear):
        raise ValueError("covariance is closed-form only for all-linear SEMs")
    d = spec.d
    inv = np.linalg.inv(np.eye(d) - spec.weights.T)
    return inv @ np.diag(spec.noise.variance) @ inv.T


def check_data_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"data must be 2-d, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contain non-finite values")
    return X


def write_dataset_csv(X, path, header: bool = True) -> None:
    X = np.asarray(X)
    head = ",".join(f"x{j}" for j in range(X.shape[1])) if header else ""
    np.savetxt(path, X, delimiter=",", header=head, comments="", fmt="%.10g")
