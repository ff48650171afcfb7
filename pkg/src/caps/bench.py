"""Experiment grid runner, dataset ingestion and stage timing."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .graph import Dag, full_dag_from_permutation, read_dag, sample_er, sample_sf
from .metrics import evaluate
from .ordering import caps_order, sortnregress_order
from .postprocess import PostprocessConfig, cam_prune, postprocess_with_trace
from .score import GaussianPlugin, SteinEstimator
from .synthesis import NoiseSpec, generate_dataset, sample_sem

log = logging.getLogger(__name__)

METHODS = ("caps", "sortnregress")
ESTIMATORS = ("stein", "analytic_plugin")
METRIC_COLS = ("shd", "sid", "f1", "d_top", "wall_time_s")
CSV_COLUMNS = (
    "kind", "dataset", "method", "linear_proportion", "seed",
    *METRIC_COLS, *(f"{m}_std" for m in METRIC_COLS), "n_cells", "error",
)


class DataFormatError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    graph_model: str = "er"
    d: int = 10
    edge_factor: float = 1
    n: int = 2000
    linear_proportions: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    noise: str = "gaussian"
    variance_mode: str = "equal"
    variance_range: tuple[float, float] = (0.4, 0.8)
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    lam: float = 50.0
    method: str = "caps"
    estimator: str = "stein"
    eta: float = 0.01
    avg_mode: str = "existing_edges"
    pscore_mode: str = "leaf"
    pre_prune_lam: float | None = None
    supplement_lam: float | None = None
    use_pre_prune: bool = True
    use_supplement: bool = True
    jobs: int = 1

    def __post_init__(self):
        if not self.seeds or not self.linear_proportions:
            raise ValueError("seeds and linear_proportions must be non-empty")
        if any(not 0.0 <= p <= 1.0 for p in self.linear_proportions):
            raise ValueError("linear proportions must lie in [0, 1]")
        if self.graph_model not in ("er", "sf"):
            raise ValueError(f"unknown graph model {self.graph_model!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.variance_mode not in ("equal", "uniform"):
            raise ValueError(f"unknown variance mode {self.variance_mode!r}")
        self.variance_range = tuple(self.variance_range)

    @property
    def dataset_name(self) -> str:
        name = f"Syn{self.graph_model.upper()}{self.edge_factor:g}"
        if self.noise != "gaussian" or self.variance_mode != "equal":
            name += f"-{self.noise}-{self.variance_mode}"
        return name

    def postprocess_config(self) -> PostprocessConfig:
        return PostprocessConfig(
            lam=self.lam, avg_mode=self.avg_mode,
            pre_prune_lam=self.pre_prune_lam, supplement_lam=self.supplement_lam,
            use_pre_prune=self.use_pre_prune, use_supplement=self.use_supplement,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def time_stage(label: str, thunk):
    """Run ``thunk`` and return (result, wall seconds)."""
    t0 = time.perf_counter()
    result = thunk()
    elapsed = time.perf_counter() - t0
    log.debug("%s took %.3fs", label, elapsed)
    return result, elapsed


def make_instance(cfg: ExperimentConfig, proportion: float, seed: int):
    """Ground-truth SEM and data for one grid cell; independent of the rest of the grid."""
    rng = np.random.default_rng([int(seed), int(round(proportion * 1_000_000))])
    sampler = sample_er if cfg.graph_model == "er" else sample_sf
    g = sampler(cfg.d, cfg.edge_factor, rng)
    if cfg.variance_mode == "equal":
        noise = NoiseSpec.equal(cfg.d, cfg.noise)
    else:
        noise = NoiseSpec.uniform(cfg.d, rng, *cfg.variance_range, kind=cfg.noise)
    spec = sample_sem(g, proportion, noise, rng, seed=int(seed))
    X = generate_dataset(spec, cfg.n, rng)
    return spec, X


def _estimator(cfg: ExperimentConfig, spec=None):
    if cfg.estimator == "analytic_plugin":
        if spec is None:
            raise ValueError("analytic plug-in needs the generating SEM")
        return GaussianPlugin.from_sem(spec)
    return SteinEstimator(eta=cfg.eta)


def discover(X, cfg: ExperimentConfig, spec=None):
    """Run the configured method; returns (dag, permutation, extras)."""
    if cfg.method == "sortnregress":
        perm = sortnregress_order(X)
        pp = cfg.postprocess_config()
        dag = cam_prune(full_dag_from_permutation(perm), X, pp)
        return dag, perm, {}
    ordering = caps_order(X, _estimator(cfg, spec), pscore_mode=cfg.pscore_mode)
    trace = postprocess_with_trace(X, ordering, cfg.postprocess_config())
    return trace.final, ordering.perm, {"ordering": ordering, "trace": trace}


def run_cell(cfg: ExperimentConfig, proportion: float, seed: int) -> dict:
    row = {"kind": "raw", "dataset": cfg.dataset_name, "method": cfg.method,
           "linear_proportion": proportion, "seed": seed}
    try:
        spec, X = make_instance(cfg, proportion, seed)
        (dag, perm, _), elapsed = time_stage("discover", lambda: discover(X, cfg, spec))
        report = evaluate(spec.graph, dag, perm, wall_time_s=elapsed)
        row.update({m: getattr(report, m) for m in METRIC_COLS})
    except Exception as exc:  # one bad cell must not sink the grid
        log.warning("cell p=%s seed=%s failed: %r", proportion, seed, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_cell_args(args):
    return run_cell(*args)


def aggregate(rows: list[dict], proportions) -> list[dict]:
    """Mean and population std of each metric per proportion, over successful cells."""
    out = []
    for prop in proportions:
        ok = [r for r in rows if r["linear_proportion"] == prop and not r.get("error")]
        agg = {"kind": "aggregate", "dataset": rows[0]["dataset"] if rows else "",
               "method": rows[0]["method"] if rows else "", "linear_proportion": prop,
               "seed": "", "n_cells": len(ok)}
        for m in METRIC_COLS:
            vals = np.array([float(r[m]) for r in ok if r.get(m) is not None], dtype=float)
            agg[m] = float(vals.mean()) if vals.size else math.nan
            agg[f"{m}_std"] = float(vals.std()) if vals.size else math.nan
        out.append(agg)
    return out


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """All raw rows (proportion-major, then seed) followed by one aggregate row per proportion."""
    cells = [(cfg, p, s) for p in cfg.linear_proportions for s in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_run_cell_args, cells))  # map keeps submission order
    else:
        rows = [run_cell(*c) for c in cells]
    return rows + aggregate(rows, cfg.linear_proportions)


def write_rows(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in CSV_COLUMNS})


def load_csv_dataset(path, has_header: bool = False) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if lineno == 1 and has_header:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataFormatError(f"{path}:{lineno}: expected {width} columns, got {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def sniff_header(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().split(",")
    try:
        [float(c) for c in first]
    except ValueError:
        return True
    return False


def run_real(dataset_path, truth_path, cfg: ExperimentConfig | None = None, has_header: bool | None = None):
    cfg = cfg if cfg is not None else ExperimentConfig()
    if has_header is None:
        has_header = sniff_header(dataset_path)
    X = load_csv_dataset(dataset_path, has_header)
    truth: Dag = read_dag(truth_path)
    if truth.d != X.shape[1]:
        raise ValueError(f"data has {X.shape[1]} columns but truth has {truth.d} nodes")
    (dag, perm, extras), elapsed = time_stage("discover", lambda: discover(X, cfg))
    report = evaluate(truth, dag, perm, wall_time_s=elapsed, dataset=Path(dataset_path).stem,
                      method=cfg.method)
    return report, dag


def config_dict(cfg: ExperimentConfig) -> dict:
    data = asdict(cfg)
    data["variance_range"] = list(cfg.variance_range)
    return data
