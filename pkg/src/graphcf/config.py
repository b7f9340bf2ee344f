"""Structured experiment configuration.

A single JSON document drives every pipeline stage. Blocks map onto the
per-module config dataclasses; unknown keys are rejected so typos fail
loudly, and seeds must be written out explicitly because reproducibility
is part of the contract (no wall-clock defaults anywhere).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .graphs import _canonical_json
from .sampler import SamplerConfig
from .training import TrainConfig
from .treecycles import TreeCyclesConfig

SCHEMA = "graphcf-experiment"
VERSION = 1

ECHO_NAME = "config-echo.json"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    kind: str
    path: str | None = None
    tree_cycles: TreeCyclesConfig | None = None


@dataclass(frozen=True)
class OracleConfig:
    kind: str
    seed: int = 0
    hidden: int = 16
    epochs: int = 100
    lr: float = 1e-2
    train_fraction: float = 0.8


@dataclass(frozen=True)
class EvaluationConfig:
    k_folds: int
    seed: int
    n_jobs: int = 1
    record_runtime: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    oracle: OracleConfig
    training: TrainConfig
    sampler: SamplerConfig
    evaluation: EvaluationConfig
    raw: dict


def _build(cls, block: dict, name: str, required=()):
    if not isinstance(block, dict):
        raise ConfigError(f"{name}: expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(block) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {unknown}")
    missing = sorted(set(required) - set(block))
    if missing:
        raise ConfigError(f"{name}: missing required keys {missing}")
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _parse_dataset(block: dict, base_dir: Path) -> DatasetConfig:
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("dataset: missing 'kind'")
    kind = block["kind"]
    rest = {k: v for k, v in block.items() if k != "kind"}
    if kind == "file":
        if set(rest) != {"path"}:
            raise ConfigError("dataset(file): exactly one key 'path' expected")
        path = (base_dir / rest["path"]).resolve()
        if not path.is_file():
            raise ConfigError(f"dataset: file not found: {path}")
        return DatasetConfig(kind="file", path=str(path))
    if kind == "tree-cycles":
        tc = _build(TreeCyclesConfig, rest, "dataset(tree-cycles)",
                    required=("num_instances", "nodes_per_instance",
                              "max_cycles", "max_cycle_size", "seed"))
        tc.validate()
        return DatasetConfig(kind="tree-cycles", tree_cycles=tc)
    raise ConfigError(f"dataset: unknown kind {kind!r}")


def _parse_oracle(block: dict) -> OracleConfig:
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("oracle: missing 'kind'")
    kind = block["kind"]
    if kind == "exact-cycle":
        if set(block) - {"kind"}:
            raise ConfigError("oracle(exact-cycle): takes no other keys")
        return OracleConfig(kind=kind)
    if kind == "trained-gcn":
        rest = {k: v for k, v in block.items() if k != "kind"}
        cfg = _build(OracleConfig, {"kind": kind, **rest}, "oracle",
                     required=("seed",))
        if not 0.0 < cfg.train_fraction < 1.0:
            raise ConfigError("oracle: train_fraction must be in (0, 1)")
        return cfg
    raise ConfigError(f"oracle: unknown kind {kind!r}")


def parse_config(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    base_dir = base_dir or Path.cwd()
    if doc.get("schema") != SCHEMA:
        raise ConfigError(f"config schema must be {SCHEMA!r}")
    if doc.get("version") != VERSION:
        raise ConfigError(f"unsupported config version {doc.get('version')!r}")
    blocks = {"schema", "version", "dataset", "oracle", "training",
              "sampler", "evaluation"}
    unknown = sorted(set(doc) - blocks)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    for key in ("dataset", "oracle", "training", "sampler", "evaluation"):
        if key not in doc:
            raise ConfigError(f"missing block {key!r}")
    return ExperimentConfig(
        dataset=_parse_dataset(doc["dataset"], base_dir),
        oracle=_parse_oracle(doc["oracle"]),
        training=_build(TrainConfig, doc["training"], "training",
                        required=("seed",)),
        sampler=_build(SamplerConfig, doc["sampler"], "sampler",
                       required=("seed",)),
        evaluation=_build(EvaluationConfig, doc["evaluation"], "evaluation",
                          required=("k_folds", "seed")),
        raw=doc,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(doc, base_dir=path.parent)


def override_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Replace every block seed with one master value (CLI --seed)."""
    raw = json.loads(json.dumps(cfg.raw))
    for key in ("training", "sampler", "evaluation"):
        raw[key]["seed"] = seed
    if raw["dataset"].get("kind") == "tree-cycles":
        raw["dataset"]["seed"] = seed
    elif raw["dataset"].get("kind") == "file":
        # The first parse resolved the path against the config location;
        # keep the resolved form so re-parsing is location-independent.
        raw["dataset"]["path"] = cfg.dataset.path
    if raw["oracle"].get("kind") == "trained-gcn":
        raw["oracle"]["seed"] = seed
    return parse_config(raw)


def echo_config(cfg: ExperimentConfig, out_dir) -> Path:
    """Write the effective config into the output directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / ECHO_NAME
    target.write_text(_canonical_json(cfg.raw) + "\n", encoding="utf-8")
    return target
