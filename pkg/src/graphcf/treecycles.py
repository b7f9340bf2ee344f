"""Synthetic tree/cycle benchmark generator.

Every instance shares the same node count. Class-0 instances are random
trees; class-1 instances reserve part of the node budget for cycle motifs,
build a tree on the rest, and attach each cycle to the tree with a single
bridge edge. Labels are checked against the exact cycle test at
generation time.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .graphs import Dataset, Graph, LabeledGraph
from .oracles import contains_cycle


@dataclass(frozen=True)
class TreeCyclesConfig:
    """Generation knobs for the tree/cycle dataset.

    ``min_cycles``/``min_cycle_size`` default to the conventional "up to"
    draws (1 and 3); setting them equal to the max pins the count or size
    exactly, which the ablation grids need.
    """

    num_instances: int
    nodes_per_instance: int
    max_cycles: int
    max_cycle_size: int
    class_balance: float = 0.5
    seed: int = 0
    min_cycles: int = 1
    min_cycle_size: int = 3
    features: str = "constant"  # or "degree"

    def validate(self) -> None:
        if self.num_instances < 1:
            raise ValueError("num_instances must be >= 1")
        if not (3 <= self.min_cycle_size <= self.max_cycle_size):
            raise ValueError("cycle sizes must satisfy 3 <= min <= max")
        if not (1 <= self.min_cycles <= self.max_cycles):
            raise ValueError("cycle counts must satisfy 1 <= min <= max")
        if self.nodes_per_instance < self.max_cycle_size:
            raise ValueError("nodes_per_instance must cover the largest cycle")
        if not (0.0 < self.class_balance < 1.0):
            raise ValueError("class_balance must be strictly between 0 and 1")
        if self.features not in ("constant", "degree"):
            raise ValueError(f"unknown feature mode {self.features!r}")
        worst = self.max_cycles * self.max_cycle_size
        if worst > self.nodes_per_instance - 1:
            raise ValueError(
                f"cycles cannot fit: up to {worst} cycle nodes, but only "
                f"{self.nodes_per_instance - 1} available next to the base tree"
            )


def random_tree(n: int, rng: np.random.Generator) -> Graph:
    """Uniform random-attachment tree on ``n`` nodes (n-1 edges, connected)."""
    if n < 1:
        raise ValueError("need n >= 1")
    a = np.zeros((n, n))
    for v in range(1, n):
        u = int(rng.integers(0, v))
        a[u, v] = a[v, u] = 1.0
    return Graph(np.ones((n, 1)), a, validate=False)


def attach_cycle(g: Graph, cycle_size: int, rng: np.random.Generator) -> Graph:
    """Attach a simple cycle on reserved (still isolated) trailing nodes.

    The existing component occupies the leading nodes; the next
    ``cycle_size`` unused indices become the cycle, joined to the component
    by one bridge edge between a uniformly chosen component node and a
    uniformly chosen cycle node.
    """
    if cycle_size < 3:
        raise ValueError("cycle_size must be >= 3")
    degrees = g.degrees()
    used_idx = np.flatnonzero(degrees > 0)
    used = int(used_idx[-1]) + 1 if used_idx.size else 1
    if used + cycle_size > g.n:
        raise ValueError(
            f"not enough reserved nodes: need {cycle_size}, have {g.n - used}"
        )
    a = g.adjacency.copy()
    ring = list(range(used, used + cycle_size))
    for i, u in enumerate(ring):
        v = ring[(i + 1) % cycle_size]
        a[u, v] = a[v, u] = 1.0
    anchor = int(rng.integers(0, used))
    target = int(rng.choice(ring))
    a[anchor, target] = a[target, anchor] = 1.0
    return Graph(g.node_features, a, validate=False)


def _finish_features(a: np.ndarray, mode: str) -> np.ndarray:
    n = a.shape[0]
    if mode == "degree":
        return a.sum(axis=1, keepdims=True)
    return np.ones((n, 1))


def _cyclic_instance(cfg: TreeCyclesConfig, rng: np.random.Generator) -> Graph:
    n = cfg.nodes_per_instance
    c = int(rng.integers(cfg.min_cycles, cfg.max_cycles + 1))
    sizes = rng.integers(cfg.min_cycle_size, cfg.max_cycle_size + 1, size=c)
    reserved = int(sizes.sum())
    g = random_tree(n - reserved, rng)
    pad = np.zeros((n, n))
    pad[: g.n, : g.n] = g.adjacency
    g = Graph(np.ones((n, 1)), pad, validate=False)
    for s in sizes:
        g = attach_cycle(g, int(s), rng)
    return g


def generate_tree_cycles(cfg: TreeCyclesConfig) -> Dataset:
    """Generate the dataset described by ``cfg``.

    Deterministic for a fixed config. Every produced label is re-checked
    against the exact cycle test; a mismatch is a bug and raises.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_cyclic = int(round(cfg.num_instances * cfg.class_balance))
    n_cyclic = min(max(n_cyclic, 1), cfg.num_instances - 1) if cfg.num_instances > 1 else n_cyclic
    labels = np.array([0] * (cfg.num_instances - n_cyclic) + [1] * n_cyclic)
    rng.shuffle(labels)
    instances = []
    for label in labels:
        if label == 1:
            g = _cyclic_instance(cfg, rng)
        else:
            g = random_tree(cfg.nodes_per_instance, rng)
        g = Graph(_finish_features(g.adjacency, cfg.features), g.adjacency, validate=False)
        if contains_cycle(g.adjacency) != bool(label):
            raise AssertionError("generated label disagrees with the cycle test")
        instances.append(LabeledGraph(g, int(label)))
    return Dataset(
        tuple(instances),
        name="tree-cycles",
        generation_params=asdict(cfg),
    )
