"""Counterfactual explanations for black-box graph classifiers.

A residual adversarial generator learns, per class, how instances of
that class differ from the rest; its latent space yields a per-edge
probability matrix from which counterfactual candidates are sampled in
partial order under oracle verification.
"""

from .ablation import AblationBudget, AblationPoint, run_ablation
from .estimators import GcnGraphClassifier, ResidualGanExplainer
from .graphs import (
    Dataset,
    FoldAssignment,
    Graph,
    LabeledGraph,
    kfold_split,
    load_dataset,
    save_dataset,
)
from .metrics import (
    AggregateReport,
    ResultRow,
    aggregate,
    evaluate,
    evaluate_candidates,
    fidelity,
    ged,
    sparsity,
)
from .models import GcnDiscriminator, GeneratedGraph, ResidualGenerator
from .oracles import CycleOracle, GcnOracle, Oracle, contains_cycle, oracle_accuracy, train_gcn_oracle
from .render import render_pictorial
from .sampler import (
    ExplanationRecord,
    PartialOrder,
    PartitionGroup,
    SamplerConfig,
    explain,
    partial_order,
    sample_candidate,
)
from .training import (
    LossTrace,
    TrainConfig,
    TrainedPair,
    realism_diagnostic,
    split_by_class,
    train_cv,
    train_pair,
)
from .treecycles import TreeCyclesConfig, attach_cycle, generate_tree_cycles, random_tree

__version__ = "0.1.0"

__all__ = [
    "AblationBudget",
    "AblationPoint",
    "AggregateReport",
    "CycleOracle",
    "Dataset",
    "ExplanationRecord",
    "FoldAssignment",
    "GcnDiscriminator",
    "GcnGraphClassifier",
    "GcnOracle",
    "GeneratedGraph",
    "Graph",
    "LabeledGraph",
    "LossTrace",
    "Oracle",
    "PartialOrder",
    "PartitionGroup",
    "ResidualGanExplainer",
    "ResidualGenerator",
    "ResultRow",
    "SamplerConfig",
    "TrainConfig",
    "TrainedPair",
    "TreeCyclesConfig",
    "aggregate",
    "attach_cycle",
    "contains_cycle",
    "evaluate",
    "evaluate_candidates",
    "explain",
    "fidelity",
    "ged",
    "generate_tree_cycles",
    "kfold_split",
    "load_dataset",
    "oracle_accuracy",
    "partial_order",
    "random_tree",
    "realism_diagnostic",
    "render_pictorial",
    "run_ablation",
    "sample_candidate",
    "save_dataset",
    "sparsity",
    "split_by_class",
    "train_cv",
    "train_gcn_oracle",
    "train_pair",
]
