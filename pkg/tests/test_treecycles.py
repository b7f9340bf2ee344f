"""Synthetic tree/cycle dataset generator."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphcf.oracles import contains_cycle
from graphcf.treecycles import (
    TreeCyclesConfig,
    attach_cycle,
    generate_tree_cycles,
    random_tree,
)


def n_components(a: np.ndarray) -> int:
    n = a.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = 0
    for s in range(n):
        if seen[s]:
            continue
        comps += 1
        stack = [s]
        seen[s] = True
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(a[u] > 0):
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
    return comps


class TestRandomTree:
    @given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=1000))
    @settings(max_examples=30)
    def test_tree_invariants(self, n, seed):
        g = random_tree(n, np.random.default_rng(seed))
        # a tree on n nodes: exactly n-1 edges, connected, acyclic
        assert g.edge_count() == n - 1
        assert n_components(g.adjacency) == 1
        assert not contains_cycle(g.adjacency)

    def test_deterministic_in_rng_state(self):
        a = random_tree(10, np.random.default_rng(4))
        b = random_tree(10, np.random.default_rng(4))
        assert a == b


class TestAttachCycle:
    def test_adds_cycle_edges_and_one_bridge(self):
        base = random_tree(5, np.random.default_rng(0))
        pad = np.zeros((9, 9))
        pad[:5, :5] = base.adjacency
        from graphcf.graphs import Graph

        g = Graph(np.ones((9, 1)), pad, validate=False)
        g2 = attach_cycle(g, 4, np.random.default_rng(1))
        # 4 ring edges plus 1 bridge
        assert g2.edge_count() == g.edge_count() + 5
        assert contains_cycle(g2.adjacency)
        assert n_components(g2.adjacency) == 1

    def test_rejects_too_small_cycle(self):
        g = random_tree(6, np.random.default_rng(0))
        with pytest.raises(ValueError):
            attach_cycle(g, 2, np.random.default_rng(0))

    def test_rejects_insufficient_reserved_nodes(self):
        g = random_tree(6, np.random.default_rng(0))
        with pytest.raises(ValueError):
            attach_cycle(g, 3, np.random.default_rng(0))


class TestGenerate:
    def base_cfg(self, **kw) -> TreeCyclesConfig:
        params = dict(num_instances=30, nodes_per_instance=16, max_cycles=2,
                      max_cycle_size=5, seed=0)
        params.update(kw)
        return TreeCyclesConfig(**params)

    def test_labels_match_cycle_test(self):
        ds = generate_tree_cycles(self.base_cfg())
        for item in ds:
            assert contains_cycle(item.graph.adjacency) == bool(item.label)

    def test_all_instances_connected(self):
        ds = generate_tree_cycles(self.base_cfg())
        for item in ds:
            assert n_components(item.graph.adjacency) == 1

    def test_class_balance(self):
        ds = generate_tree_cycles(self.base_cfg(num_instances=100))
        labels = ds.labels()
        assert labels.sum() == 50

    def test_edge_count_structure(self):
        # acyclic: exactly n-1 edges; cyclic: n-1+c edges for c in [1, max_cycles]
        cfg = self.base_cfg(num_instances=60)
        ds = generate_tree_cycles(cfg)
        n = cfg.nodes_per_instance
        for item in ds:
            extra = item.graph.edge_count() - (n - 1)
            if item.label == 0:
                assert extra == 0
            else:
                assert 1 <= extra <= cfg.max_cycles

    def test_deterministic_per_seed(self):
        a = generate_tree_cycles(self.base_cfg(seed=5))
        b = generate_tree_cycles(self.base_cfg(seed=5))
        c = generate_tree_cycles(self.base_cfg(seed=6))
        assert all(x.graph == y.graph and x.label == y.label for x, y in zip(a, b))
        assert any(x.graph != y.graph for x, y in zip(a, c))

    def test_constant_features_default(self):
        ds = generate_tree_cycles(self.base_cfg())
        for item in ds:
            assert np.all(item.graph.node_features == 1.0)

    def test_degree_features_option(self):
        ds = generate_tree_cycles(self.base_cfg(features="degree"))
        for item in ds:
            expect = item.graph.adjacency.sum(axis=1, keepdims=True)
            assert np.array_equal(item.graph.node_features, expect)

    def test_pinned_cycle_count_and_size(self):
        cfg = self.base_cfg(num_instances=40, nodes_per_instance=32,
                            min_cycles=2, max_cycles=2,
                            min_cycle_size=4, max_cycle_size=4)
        ds = generate_tree_cycles(cfg)
        for item in ds:
            if item.label == 1:
                # exactly 2 cycles of size 4: n-1 tree/bridge edges + 2 ring closures
                assert item.graph.edge_count() == cfg.nodes_per_instance - 1 + 2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            self.base_cfg(num_instances=0).validate()
        with pytest.raises(ValueError):
            self.base_cfg(max_cycle_size=2).validate()
        with pytest.raises(ValueError):
            self.base_cfg(max_cycles=0).validate()
        with pytest.raises(ValueError):
            self.base_cfg(features="onehot").validate()
        with pytest.raises(ValueError):
            # reserved cycle nodes would not fit
            TreeCyclesConfig(num_instances=5, nodes_per_instance=8,
                             max_cycles=3, max_cycle_size=7).validate()

    def test_generation_params_recorded(self):
        cfg = self.base_cfg(seed=12)
        ds = generate_tree_cycles(cfg)
        assert ds.name == "tree-cycles"
        assert ds.generation_params["seed"] == 12
        assert ds.generation_params["nodes_per_instance"] == 16
