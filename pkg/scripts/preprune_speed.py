"""Effect of pre-pruning on the additive-model pruning stage (SynER1, d=20).

    python3 scripts/preprune_speed.py --seeds 5
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from caps.bench import ExperimentConfig, make_instance, time_stage
from caps.graph import full_dag_from_permutation
from caps.ordering import caps_order
from caps.postprocess import PostprocessConfig, cam_prune, pre_prune


@dataclass
class SpeedConfig:
    d: int = 20
    n: int = 1000
    linear_proportion: float = 0.5
    n_seeds: int = 5
    lam: float = 50.0


@dataclass
class SpeedRow:
    seed: int
    candidates_full: int
    candidates_pre: int
    prune_s_full: float
    prune_s_pre: float

    @property
    def reduction(self) -> float:
        return 1.0 - self.candidates_pre / self.candidates_full


def measure(cfg: SpeedConfig, seed: int) -> SpeedRow:
    exp = ExperimentConfig(d=cfg.d, n=cfg.n, linear_proportions=[cfg.linear_proportion], seeds=[seed])
    _, X = make_instance(exp, cfg.linear_proportion, seed)
    ordering = caps_order(X)
    full = full_dag_from_permutation(ordering.perm)
    pre = pre_prune(full, ordering.pscore, cfg.lam)
    pp = PostprocessConfig(lam=cfg.lam)
    _, t_full = time_stage("prune-full", lambda: cam_prune(full, X, pp))
    _, t_pre = time_stage("prune-pre", lambda: cam_prune(pre, X, pp))
    return SpeedRow(seed, full.n_edges, pre.n_edges, t_full, t_pre)


def run(cfg: SpeedConfig) -> list[SpeedRow]:
    return [measure(cfg, s) for s in range(cfg.n_seeds)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=SpeedConfig.n_seeds)
    args = ap.parse_args()
    for r in run(SpeedConfig(n_seeds=args.seeds)):
        print(f"seed={r.seed} candidates {r.candidates_full}->{r.candidates_pre} "
              f"({100 * r.reduction:.0f}% fewer) prune {r.prune_s_full:.2f}s->{r.prune_s_pre:.2f}s")


if __name__ == "__main__":
    main()
