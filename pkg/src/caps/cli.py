"""Command-line entry point: ``caps {generate,discover,bench,metrics,real}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .graph import read_dag, write_edge_list, sample_er, sample_sf
from .metrics import CSV_FIELDS, evaluate
from .ordering import caps_order
from .postprocess import postprocess_with_trace
from .score import SteinEstimator, GaussianPlugin
from .synthesis import NoiseSpec, SemSpec, generate_dataset, sample_sem, write_dataset_csv

log = logging.getLogger("caps")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="rigor for pre-prune and supplement (default 50)")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--estimator", choices=bench.ESTIMATORS, default=None)
    p.add_argument("--avg-mode", choices=("existing_edges", "all_entries"), default=None)
    p.add_argument("--eta", type=float, default=None, help="ridge term of the Stein estimator")
    p.add_argument("--output", "-o", default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="caps", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a SEM, write data, truth and spec")
    _common(g)
    g.add_argument("--graph", choices=("er", "sf"), default="er")
    g.add_argument("--d", type=int, default=10)
    g.add_argument("--edge-factor", type=float, default=1)
    g.add_argument("--n", type=int, default=2000)
    g.add_argument("--linear-proportion", type=float, default=0.5)
    g.add_argument("--noise", choices=("gaussian", "gumbel", "laplace"), default="gaussian")
    g.add_argument("--variance-mode", choices=("equal", "uniform"), default="equal")

    d = sub.add_parser("discover", help="learn a DAG from a CSV dataset")
    _common(d)
    d.add_argument("data")
    d.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
    d.add_argument("--sem", help="SEM JSON, required for the analytic plug-in estimator")
    d.add_argument("--ordering-json", help="also write order and parent scores here")

    b = sub.add_parser("bench", help="run an experiment grid to CSV")
    _common(b)
    b.add_argument("--config", help="ExperimentConfig JSON")
    b.add_argument("--method", choices=bench.METHODS, default=None)
    b.add_argument("--proportions", help="comma-separated linear proportions")
    b.add_argument("--seeds", type=int, default=None, help="number of seeds, starting at --seed")

    m = sub.add_parser("metrics", help="compare an estimated DAG to the truth")
    _common(m)
    m.add_argument("truth")
    m.add_argument("estimate")

    r = sub.add_parser("real", help="discover on a real dataset and score against its truth")
    _common(r)
    r.add_argument("data")
    r.add_argument("truth")
    r.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
    return parser


def _config(args, base: bench.ExperimentConfig | None = None) -> bench.ExperimentConfig:
    data = bench.config_dict(base) if base is not None else bench.config_dict(bench.ExperimentConfig())
    for key, attr in (("lam", "lam"), ("jobs", "jobs"), ("estimator", "estimator"),
                      ("avg_mode", "avg_mode"), ("eta", "eta"), ("method", "method")):
        val = getattr(args, attr, None)
        if val is not None:
            data[key] = val
    if getattr(args, "proportions", None):
        data["linear_proportions"] = [float(x) for x in args.proportions.split(",")]
    if getattr(args, "seeds", None):
        data["seeds"] = list(range(args.seed, args.seed + args.seeds))
    return bench.ExperimentConfig.from_dict(data)


def _header(flag: str, path) -> bool:
    return bench.sniff_header(path) if flag == "auto" else flag == "yes"


def cmd_generate(args) -> int:
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    g = (sample_er if args.graph == "er" else sample_sf)(args.d, args.edge_factor, rng)
    if args.variance_mode == "equal":
        noise = NoiseSpec.equal(args.d, args.noise)
    else:
        noise = NoiseSpec.uniform(args.d, rng, kind=args.noise)
    spec = sample_sem(g, args.linear_proportion, noise, rng, seed=args.seed)
    X = generate_dataset(spec, args.n, rng)
    write_dataset_csv(X, out / "data.csv")
    write_edge_list(g, out / "truth.txt")
    spec.save(out / "sem.json")
    print(json.dumps({"data": str(out / "data.csv"), "truth": str(out / "truth.txt"),
                      "sem": str(out / "sem.json"), "n": args.n, "d": args.d, "edges": g.n_edges}))
    return 0


def cmd_discover(args) -> int:
    X = bench.load_csv_dataset(args.data, _header(args.header, args.data))
    cfg = _config(args)
    if cfg.estimator == "analytic_plugin":
        if not args.sem:
            raise ValueError("--estimator analytic_plugin needs --sem")
        estimator = GaussianPlugin.from_sem(SemSpec.load(args.sem))
    else:
        estimator = SteinEstimator(eta=cfg.eta)
    ordering = caps_order(X, estimator, pscore_mode=cfg.pscore_mode)
    trace = postprocess_with_trace(X, ordering, cfg.postprocess_config())
    out = Path(args.output) if args.output else None
    if out:
        write_edge_list(trace.final, out)
    else:
        sys.stdout.write("\n".join([f"# d={trace.final.d}"] + [f"{i} {j}" for i, j in trace.final.edges()]) + "\n")
    if args.ordering_json:
        ordering.save(args.ordering_json, trace=args.verbose)
    if args.verbose and out:
        with open(out.with_suffix(".jac.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "node", "jac_diag_mean"])
            for step, (nodes, jac) in enumerate(ordering.jac_trace):
                w.writerows([step, n, f"{v:.10g}"] for n, v in zip(nodes, jac))
        out.with_suffix(".trace.json").write_text(json.dumps(trace.to_dict(), indent=2), encoding="utf-8")
    return 0


def cmd_bench(args) -> int:
    base = bench.ExperimentConfig.from_json(args.config) if args.config else None
    cfg = _config(args, base)
    rows = bench.run_experiment(cfg)
    out = args.output or "bench.csv"
    bench.write_rows(rows, out)
    for r in rows:
        if r["kind"] == "aggregate":
            print(f"{r['method']} p={r['linear_proportion']:.2f} "
                  f"SHD={r['shd']:.2f}±{r['shd_std']:.2f} SID={r['sid']:.2f}±{r['sid_std']:.2f} "
                  f"F1={r['f1']:.3f}±{r['f1_std']:.3f} Dtop={r['d_top']:.2f}")
    return 0


def cmd_metrics(args) -> int:
    report = evaluate(read_dag(args.truth), read_dag(args.estimate), dataset=Path(args.truth).stem, seed=args.seed)
    _emit_report(report, args.output)
    return 0


def cmd_real(args) -> int:
    cfg = _config(args)
    report, dag = bench.run_real(args.data, args.truth, cfg, _header(args.header, args.data))
    _emit_report(report, args.output)
    return 0


def _emit_report(report, output):
    row = report.to_row()
    if output:
        with open(output, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            w.writeheader()
            w.writerow(row)
    print(json.dumps(row))


COMMANDS = {
    "generate": cmd_generate,
    "discover": cmd_discover,
    "bench": cmd_bench,
    "metrics": cmd_metrics,
    "real": cmd_real,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
