"""Counterfactual candidate production by partial-order edge sampling.

Edges are drawn group by group: first the instance's own edges (no
verification), then the absent pairs, where every draw is followed by an
oracle check so the first class flip is returned immediately. A pass
that ends without a flip is retried with fresh draws; when every attempt
fails, the original input is returned unchanged and flagged invalid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .models import GeneratedGraph, ResidualGenerator
from .oracles import Oracle


class GeneratorClassMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class PartitionGroup:
    """Ordered edge set with its verification guard.

    guard=False: draw the whole group, no oracle involvement.
    guard=True: the oracle is consulted after every draw in the group.
    """

    edges: tuple[tuple[int, int], ...]
    guard: bool

    def __post_init__(self):
        for u, v in self.edges:
            if not 0 <= u < v:
                raise ValueError(f"edge ({u}, {v}) is not in canonical form")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges in partition group")


@dataclass(frozen=True)
class PartialOrder:
    groups: tuple[PartitionGroup, ...]

    def validate(self, n: int) -> None:
        """Groups must partition the full set of unordered node pairs."""
        seen: set[tuple[int, int]] = set()
        for grp in self.groups:
            for e in grp.edges:
                if e in seen:
                    raise ValueError(f"edge {e} appears in two groups")
                seen.add(e)
        expected = n * (n - 1) // 2
        if len(seen) != expected:
            raise ValueError(
                f"groups cover {len(seen)} pairs, expected {expected}")


def partial_order(adjacency: np.ndarray) -> PartialOrder:
    """Two groups: present edges (unguarded) then absent pairs (guarded)."""
    iu, ju = np.triu_indices(adjacency.shape[0], 1)
    present = adjacency[iu, ju] > 0
    pos = tuple((int(u), int(v)) for u, v in zip(iu[present], ju[present]))
    neg = tuple((int(u), int(v)) for u, v in zip(iu[~present], ju[~present]))
    return PartialOrder((
        PartitionGroup(pos, guard=False),
        PartitionGroup(neg, guard=True),
    ))


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for the sampling loop.

    prob_floor skips guarded-group pairs whose probability is below the
    floor (they would essentially never be drawn but each would cost an
    oracle check). boundary_check adds one verification between the
    unguarded and guarded phases so removal-only counterfactuals are
    caught before any addition is attempted.
    """

    max_attempts: int = 10
    prob_floor: float = 1e-3
    boundary_check: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if not 0.0 <= self.prob_floor < 1.0:
            raise ValueError("prob_floor must be in [0, 1)")


@dataclass(frozen=True)
class SampleResult:
    graph: Graph
    valid: bool
    output_class: int
    guarded_calls: int
    attempts: int


def _ordered_by_prob(edges, prob: np.ndarray):
    if not edges:
        return []
    p = np.array([prob[u, v] for u, v in edges])
    return [edges[i] for i in np.argsort(-p, kind="stable")]


def sample_candidate(g_star: Graph, gen_out: GeneratedGraph | np.ndarray,
                     oracle: Oracle, cfg: SamplerConfig,
                     rng: np.random.Generator,
                     input_class: int | None = None) -> SampleResult:
    prob = gen_out.prob if isinstance(gen_out, GeneratedGraph) else gen_out
    if prob.shape != g_star.adjacency.shape:
        raise ValueError("probability matrix shape does not match the input")
    if input_class is None:
        input_class = oracle.predict(g_star)

    po = partial_order(g_star.adjacency)
    orderings = [_ordered_by_prob(grp.edges, prob) for grp in po.groups]
    n = g_star.n
    a_prime = np.zeros((n, n))
    working = Graph._wrap(g_star.node_features, a_prime)
    guarded_calls = 0

    def finish(cls: int, attempt: int) -> SampleResult:
        return SampleResult(
            graph=Graph(g_star.node_features, a_prime),
            valid=True, output_class=cls,
            guarded_calls=guarded_calls, attempts=attempt,
        )

    for attempt in range(1, cfg.max_attempts + 1):
        a_prime[:] = 0.0
        # Whether the oracle has seen a_prime in its current state.
        checked = False
        for grp, edges in zip(po.groups, orderings):
            for u, v in edges:
                p = prob[u, v]
                if grp.guard and p < cfg.prob_floor:
                    continue
                if rng.random() < p:
                    if a_prime[u, v] == 0.0:
                        a_prime[u, v] = a_prime[v, u] = 1.0
                        checked = False
                if grp.guard:
                    guarded_calls += 1
                    cls = oracle.predict(working)
                    checked = True
                    if cls != input_class:
                        return finish(cls, attempt)
            if not grp.guard and cfg.boundary_check:
                cls = oracle.predict(working)
                checked = True
                if cls != input_class:
                    return finish(cls, attempt)
        if not checked:
            cls = oracle.predict(working)
            if cls != input_class:
                return finish(cls, attempt)

    return SampleResult(graph=g_star, valid=False, output_class=input_class,
                        guarded_calls=guarded_calls,
                        attempts=cfg.max_attempts)


@dataclass(frozen=True)
class ExplanationRecord:
    candidate: Graph
    valid: bool
    input_class: int
    output_class: int
    oracle_calls: int
    guarded_calls: int
    attempts: int
    runtime_s: float
    added: tuple[tuple[int, int], ...]
    removed: tuple[tuple[int, int], ...]


def edge_diff(a: np.ndarray, a_prime: np.ndarray):
    """Canonical (added, removed) pair lists between two adjacencies."""
    delta = np.triu(a_prime - a, 1)
    added = tuple((int(u), int(v)) for u, v in np.argwhere(delta > 0))
    removed = tuple((int(u), int(v)) for u, v in np.argwhere(delta < 0))
    return added, removed


def explain(g_star: Graph, gen: ResidualGenerator, oracle: Oracle,
            cfg: SamplerConfig,
            rng: np.random.Generator | None = None) -> ExplanationRecord:
    """Generate once, then sample a counterfactual candidate.

    All oracle traffic (the input classification, boundary and guarded
    checks) happens inside one accounting window; the reported
    oracle_calls is the window delta.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    with oracle.call_window() as window:
        input_class = oracle.predict(g_star)
        if gen.explainee_class is not None and gen.explainee_class != input_class:
            raise GeneratorClassMismatchError(
                f"generator was trained for class {gen.explainee_class}, "
                f"input is predicted as class {input_class}"
            )
        gen_out = gen.generate(g_star)
        result = sample_candidate(g_star, gen_out, oracle, cfg, rng,
                                  input_class=input_class)
    runtime = time.perf_counter() - t0

    if result.valid:
        assert result.output_class != input_class
    else:
        assert result.graph is g_star
    added, removed = edge_diff(g_star.adjacency, result.graph.adjacency)
    return ExplanationRecord(
        candidate=result.graph,
        valid=result.valid,
        input_class=input_class,
        output_class=result.output_class,
        oracle_calls=window.calls,
        guarded_calls=result.guarded_calls,
        attempts=result.attempts,
        runtime_s=runtime,
        added=added,
        removed=removed,
    )
