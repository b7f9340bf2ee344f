"""Ablation sweeps over dataset-structure knobs.

Each grid point regenerates the dataset, retrains the cross-validated
models from scratch and evaluates them, so points are fully independent.
Budgets (instances, folds, epochs) are deliberately smaller than the
headline configuration; the quantities of interest here are trends, not
absolute scores.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .graphs import kfold_split
from .metrics import evaluate
from .oracles import CycleOracle
from .sampler import SamplerConfig
from .training import TrainConfig, derive_seed, train_cv
from .treecycles import TreeCyclesConfig, generate_tree_cycles

log = logging.getLogger(__name__)

KINDS = ("cycle-size", "cycle-count", "node-count", "dataset-size")

DEFAULT_GRIDS: dict[str, tuple[int, ...]] = {
    "cycle-size": (3, 12, 28),
    "cycle-count": (2, 8, 32),
    "node-count": (28, 128, 512),
    "dataset-size": (100, 500, 1000),
}


@dataclass(frozen=True)
class AblationBudget:
    num_instances: int
    k_folds: int
    epochs: int
    n_jobs: int = 1


DEFAULT_BUDGETS: dict[str, AblationBudget] = {
    "cycle-size": AblationBudget(num_instances=120, k_folds=3, epochs=120),
    "cycle-count": AblationBudget(num_instances=120, k_folds=3, epochs=120),
    "node-count": AblationBudget(num_instances=100, k_folds=3, epochs=60),
    "dataset-size": AblationBudget(num_instances=0, k_folds=3, epochs=120),
}


@dataclass(frozen=True)
class AblationPoint:
    x: int
    nodes: int
    correctness_mean: float
    correctness_se: float
    ged_mean: float
    ged_se: float

    @property
    def ged_per_node(self) -> float:
        return self.ged_mean / self.nodes


def dataset_config_for(kind: str, x: int, num_instances: int,
                       seed: int) -> TreeCyclesConfig:
    """Dataset parameters at one grid point; raises on infeasible combos."""
    if kind == "cycle-size":
        return TreeCyclesConfig(
            num_instances=num_instances, nodes_per_instance=128,
            max_cycles=4, min_cycles=4,
            max_cycle_size=x, min_cycle_size=x, seed=seed)
    if kind == "cycle-count":
        return TreeCyclesConfig(
            num_instances=num_instances, nodes_per_instance=128,
            max_cycles=x, min_cycles=x,
            max_cycle_size=3, min_cycle_size=3, seed=seed)
    if kind == "node-count":
        return TreeCyclesConfig(
            num_instances=num_instances, nodes_per_instance=x,
            max_cycles=3, max_cycle_size=7, seed=seed)
    if kind == "dataset-size":
        return TreeCyclesConfig(
            num_instances=x, nodes_per_instance=28,
            max_cycles=3, max_cycle_size=7, seed=seed)
    raise ValueError(f"unknown ablation kind {kind!r}; expected one of {KINDS}")


def run_point(kind: str, x: int, budget: AblationBudget,
              train_cfg: TrainConfig, sampler_cfg: SamplerConfig,
              seed: int) -> AblationPoint:
    kind_idx = KINDS.index(kind)
    ds_cfg = dataset_config_for(kind, x, budget.num_instances,
                                derive_seed(seed, kind_idx, x, 0))
    ds = generate_tree_cycles(ds_cfg)
    folds = kfold_split(ds, budget.k_folds, derive_seed(seed, kind_idx, x, 1))
    oracle = CycleOracle()
    cfg = replace(train_cfg, epochs=budget.epochs,
                  seed=derive_seed(seed, kind_idx, x, 2))
    models = train_cv(ds, folds, oracle, cfg, n_jobs=budget.n_jobs)
    s_cfg = replace(sampler_cfg, seed=derive_seed(seed, kind_idx, x, 3))
    report, _rows = evaluate(ds, folds, oracle, models, s_cfg,
                             n_jobs=budget.n_jobs)
    return AblationPoint(
        x=x, nodes=ds_cfg.nodes_per_instance,
        correctness_mean=report.means["correctness"],
        correctness_se=report.ses["correctness"],
        ged_mean=report.means["ged"],
        ged_se=report.ses["ged"],
    )


def run_ablation(kind: str, grid=None, budget: AblationBudget | None = None,
                 train_cfg: TrainConfig | None = None,
                 sampler_cfg: SamplerConfig | None = None,
                 seed: int = 0) -> list[AblationPoint]:
    if kind not in KINDS:
        raise ValueError(f"unknown ablation kind {kind!r}; expected one of {KINDS}")
    grid = tuple(grid) if grid is not None else DEFAULT_GRIDS[kind]
    budget = budget or DEFAULT_BUDGETS[kind]
    train_cfg = train_cfg or TrainConfig()
    sampler_cfg = sampler_cfg or SamplerConfig()
    points = []
    for x in grid:
        log.info("ablation %s: point x=%d starting", kind, x)
        point = run_point(kind, int(x), budget, train_cfg, sampler_cfg, seed)
        log.info("ablation %s: x=%d correctness %.3f ged %.3f",
                 kind, x, point.correctness_mean, point.ged_mean)
        points.append(point)
    return points


_TREND_HEADER = ("x\tnodes\tcorrectness_mean\tcorrectness_se\t"
                 "ged_mean\tged_se\tged_per_node")


def write_trend(path, points: list[AblationPoint]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_TREND_HEADER + "\n")
        for p in points:
            fh.write(f"{p.x}\t{p.nodes}\t{p.correctness_mean:.6f}\t"
                     f"{p.correctness_se:.6f}\t{p.ged_mean:.6f}\t"
                     f"{p.ged_se:.6f}\t{p.ged_per_node:.6f}\n")


def read_trend(path) -> list[AblationPoint]:
    points = []
    with open(path, encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != _TREND_HEADER:
            raise ValueError(f"{path}: unexpected trend header")
        for line in fh:
            x, nodes, cm, cs, gm, gs, _gpn = line.rstrip("\n").split("\t")
            points.append(AblationPoint(
                x=int(x), nodes=int(nodes),
                correctness_mean=float(cm), correctness_se=float(cs),
                ged_mean=float(gm), ged_se=float(gs),
            ))
    return points
