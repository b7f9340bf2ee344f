"""Command-line pipeline driver.

Stages mirror the experiment flow: gen-data, train-oracle, train,
explain, evaluate, ablate, render. Every stage takes --config pointing
at an experiment JSON; --seed overrides every block seed at once. When
GRAPHCF_OUT is set, relative output paths land under that root.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .ablation import DEFAULT_BUDGETS, KINDS, AblationBudget, run_ablation, write_trend
from .config import ConfigError, ExperimentConfig, echo_config, load_config, override_seed
from .graphs import DatasetFormatError, Dataset, kfold_split, load_dataset, save_dataset
from .metrics import (
    MissingCheckpointError,
    evaluate,
    ged,
    read_rows,
    write_report,
    write_rows,
)
from .oracles import CycleOracle, GcnOracle, Oracle, OracleNotReadyError, oracle_accuracy
from .render import RenderError, render_pictorial
from .sampler import GeneratorClassMismatchError, explain
from .training import load_cv_models, save_cv_models, train_cv
from .treecycles import generate_tree_cycles

log = logging.getLogger(__name__)

_KNOWN_ERRORS = (ConfigError, DatasetFormatError, MissingCheckpointError,
                 OracleNotReadyError, GeneratorClassMismatchError,
                 RenderError, FileNotFoundError, ValueError, KeyError)


def _out_path(p: str) -> Path:
    root = os.environ.get("GRAPHCF_OUT")
    path = Path(p)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _out_dir(p: str) -> Path:
    root = os.environ.get("GRAPHCF_OUT")
    path = Path(p)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_effective_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = override_seed(cfg, args.seed)
    return cfg


def _build_oracle(cfg: ExperimentConfig, args, ds: Dataset) -> Oracle:
    if cfg.oracle.kind == "exact-cycle":
        return CycleOracle()
    oracle_path = getattr(args, "oracle", None)
    if not oracle_path:
        raise ConfigError(
            "oracle kind 'trained-gcn' needs --oracle pointing at a "
            "classifier checkpoint (produce one with train-oracle)")
    from .estimators import load_classifier

    return GcnOracle(load_classifier(oracle_path))


def _dataset(args) -> Dataset:
    return load_dataset(args.data)


# ---- subcommand bodies ---------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = _load_effective_config(args)
    if cfg.dataset.kind != "tree-cycles":
        raise ConfigError("gen-data needs a tree-cycles dataset block")
    ds = generate_tree_cycles(cfg.dataset.tree_cycles)
    out = _out_path(args.out)
    save_dataset(ds, out)
    print(f"wrote {len(ds)} instances to {out}")
    return 0


def cmd_train_oracle(args) -> int:
    cfg = _load_effective_config(args)
    if cfg.oracle.kind != "trained-gcn":
        raise ConfigError(
            f"oracle kind {cfg.oracle.kind!r} needs no training")
    ds = _dataset(args)
    rng = np.random.default_rng(cfg.oracle.seed)
    perm = rng.permutation(len(ds))
    n_train = max(2, int(round(cfg.oracle.train_fraction * len(ds))))
    from .oracles import train_gcn_oracle

    oracle = train_gcn_oracle(
        ds, perm[:n_train],
        config={"hidden": cfg.oracle.hidden, "epochs": cfg.oracle.epochs,
                "lr": cfg.oracle.lr},
        seed=cfg.oracle.seed)
    out = _out_path(args.out)
    from .estimators import save_classifier

    save_classifier(out, oracle.classifier)
    held = oracle.heldout_accuracy
    print(f"wrote classifier checkpoint to {out}"
          + (f" (held-out accuracy {held:.3f})" if held is not None else ""))
    return 0


def cmd_train(args) -> int:
    cfg = _load_effective_config(args)
    ds = _dataset(args)
    oracle = _build_oracle(cfg, args, ds)
    folds = kfold_split(ds, cfg.evaluation.k_folds, cfg.evaluation.seed)
    models = train_cv(ds, folds, oracle, cfg.training,
                      n_jobs=args.jobs or cfg.evaluation.n_jobs)
    out = _out_dir(args.out_dir)
    save_cv_models(out, models)
    echo_config(cfg, out)
    print(f"wrote {len(models)} checkpoints to {out}")
    return 0


def cmd_explain(args) -> int:
    cfg = _load_effective_config(args)
    ds = _dataset(args)
    oracle = _build_oracle(cfg, args, ds)
    models = load_cv_models(args.models)
    if not models:
        raise MissingCheckpointError(f"no checkpoints under {args.models}")
    folds = kfold_split(ds, cfg.evaluation.k_folds, cfg.evaluation.seed)
    i = args.instance
    if not 0 <= i < len(ds):
        raise ValueError(f"instance {i} out of range [0, {len(ds)})")
    fold = int(folds.membership[i])
    g = ds[i].graph
    c = oracle.predict(g)
    if (fold, c) not in models:
        raise MissingCheckpointError(
            f"missing checkpoint for fold {fold}, class {c}")
    rec = explain(g, models[(fold, c)].generator, oracle, cfg.sampler)
    dist = ged(g, rec.candidate)
    print(f"instance {i} (fold {fold}, class {c}): valid={rec.valid} "
          f"ged={dist:g} oracle_calls={rec.oracle_calls} "
          f"runtime={rec.runtime_s:.4f}s")
    if rec.added:
        print("added:   " + " ".join(f"{u}-{v}" for u, v in rec.added))
    if rec.removed:
        print("removed: " + " ".join(f"{u}-{v}" for u, v in rec.removed))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_effective_config(args)
    ds = _dataset(args)
    oracle = _build_oracle(cfg, args, ds)
    models = load_cv_models(args.models)
    if not models:
        raise MissingCheckpointError(f"no checkpoints under {args.models}")
    folds = kfold_split(ds, cfg.evaluation.k_folds, cfg.evaluation.seed)
    report, rows = evaluate(
        ds, folds, oracle, models, cfg.sampler,
        n_jobs=args.jobs or cfg.evaluation.n_jobs,
        record_runtime=cfg.evaluation.record_runtime,
        config_echo=cfg.raw)
    out = _out_dir(args.out_dir)
    write_rows(out / "rows.tsv", rows)
    write_report(out / "report.tsv", report)
    echo_config(cfg, out)
    acc = oracle_accuracy(oracle, ds)
    for name in ("runtime_s", "ged", "oracle_calls", "correctness",
                 "sparsity", "fidelity"):
        print(f"{name}: {report.means[name]:.3f} +- {report.ses[name]:.3f}")
    print(f"oracle accuracy: {acc:.3f}")
    print(f"results in {out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_effective_config(args)
    grid = tuple(int(x) for x in args.grid.split(",")) if args.grid else None
    base = DEFAULT_BUDGETS[args.kind]
    budget = AblationBudget(
        num_instances=args.budget_instances or base.num_instances,
        k_folds=args.budget_folds or base.k_folds,
        epochs=args.budget_epochs or base.epochs,
        n_jobs=args.jobs or base.n_jobs,
    )
    points = run_ablation(args.kind, grid=grid, budget=budget,
                          train_cfg=cfg.training, sampler_cfg=cfg.sampler,
                          seed=cfg.evaluation.seed)
    out = _out_path(args.out)
    write_trend(out, points)
    for p in points:
        print(f"x={p.x}: correctness {p.correctness_mean:.3f} "
              f"ged {p.ged_mean:.3f} ged/n {p.ged_per_node:.4f}")
    print(f"trend written to {out}")
    return 0


def cmd_render(args) -> int:
    ds = _dataset(args)
    rows = read_rows(args.results)
    out = _out_path(args.out)
    blob = render_pictorial(rows, ds, out)
    print(f"wrote {len(blob)} bytes to {out}")
    return 0


# ---- argument wiring -----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphcf",
        description="Counterfactual graph explanations from a residual "
                    "adversarial generator.")
    parser.add_argument("--log-level", default="WARNING",
                        help="logging threshold (DEBUG, INFO, ...)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_data=True):
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override every block seed")
        if needs_data:
            p.add_argument("--data", required=True, help="dataset file")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    common(p, needs_data=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-oracle", help="fit the GCN stand-in oracle")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_oracle)

    p = sub.add_parser("train", help="train per-fold generator pairs")
    common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--oracle", help="classifier checkpoint (trained-gcn)")
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="explain one instance")
    common(p)
    p.add_argument("--models", required=True)
    p.add_argument("--instance", type=int, required=True)
    p.add_argument("--oracle", help="classifier checkpoint (trained-gcn)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="cross-validated metric run")
    common(p)
    p.add_argument("--models", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--oracle", help="classifier checkpoint (trained-gcn)")
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="dataset-structure sweep")
    common(p, needs_data=False)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--grid", help="comma-separated grid values")
    p.add_argument("--out", required=True)
    p.add_argument("--budget-instances", type=int, default=0)
    p.add_argument("--budget-folds", type=int, default=0)
    p.add_argument("--budget-epochs", type=int, default=0)
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("render", help="raster image of edge operations")
    p.add_argument("--results", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
