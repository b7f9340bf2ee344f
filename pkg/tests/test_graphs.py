"""Core graph container, dataset persistence, and fold assignment."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphcf.graphs import (
    Dataset,
    DatasetFormatError,
    FoldAssignment,
    Graph,
    GraphValidationError,
    LabeledGraph,
    kfold_split,
    load_dataset,
    new_graph,
    save_dataset,
)


def path_graph(n: int, d: int = 1) -> Graph:
    g = Graph.empty(n, d)
    for u in range(n - 1):
        g = g.add_edge(u, u + 1)
    return g


def random_graph(rng: np.random.Generator, n: int, p: float = 0.3) -> Graph:
    a = (rng.random((n, n)) < p).astype(float)
    a = np.triu(a, 1)
    a = a + a.T
    return Graph(np.ones((n, 1)), a)


class TestGraph:
    def test_new_graph_zero_case(self):
        g = new_graph(3, 1)
        assert g.adjacency.shape == (3, 3)
        assert g.node_features.shape == (3, 1)
        assert not g.adjacency.any()
        assert not g.node_features.any()

    def test_arrays_are_frozen(self):
        g = new_graph(3, 1)
        with pytest.raises(ValueError):
            g.adjacency[0, 1] = 1.0
        with pytest.raises(ValueError):
            g.node_features[0, 0] = 2.0

    def test_constructor_copies_input(self):
        a = np.zeros((3, 3))
        g = Graph(np.ones((3, 1)), a)
        a[0, 1] = a[1, 0] = 1.0
        assert g.edge_count() == 0

    def test_add_edge_returns_new_graph(self):
        g = new_graph(4, 1)
        g2 = g.add_edge(1, 3)
        assert g.edge_count() == 0
        assert g2.edge_count() == 1
        assert g2.adjacency[1, 3] == 1.0
        assert g2.adjacency[3, 1] == 1.0

    def test_add_edge_idempotent(self):
        g = new_graph(3, 1).add_edge(0, 1)
        assert g.add_edge(0, 1) == g
        assert g.add_edge(1, 0) == g

    def test_add_edge_rejects_self_loop(self):
        with pytest.raises(GraphValidationError):
            new_graph(3, 1).add_edge(1, 1)

    def test_add_edge_rejects_out_of_range(self):
        with pytest.raises(GraphValidationError):
            new_graph(3, 1).add_edge(0, 3)
        with pytest.raises(GraphValidationError):
            new_graph(3, 1).add_edge(-1, 0)

    def test_asymmetric_adjacency_rejected(self):
        a = np.zeros((3, 3))
        a[0, 1] = 1.0
        with pytest.raises(GraphValidationError):
            Graph(np.ones((3, 1)), a)

    def test_nonzero_diagonal_rejected(self):
        a = np.eye(3)
        with pytest.raises(GraphValidationError):
            Graph(np.ones((3, 1)), a)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(GraphValidationError):
            Graph(np.ones((2, 1)), np.zeros((3, 3)))

    def test_edges_canonical_order(self):
        g = new_graph(4, 1).add_edge(2, 3).add_edge(0, 2).add_edge(0, 1)
        assert g.edges() == [(0, 1), (0, 2), (2, 3)]

    def test_degrees_of_path(self):
        g = path_graph(4)
        assert g.degrees().tolist() == [1.0, 2.0, 2.0, 1.0]

    def test_equality_and_hash(self):
        g1 = path_graph(3)
        g2 = path_graph(3)
        assert g1 == g2
        assert hash(g1) == hash(g2)
        assert g1 != g2.add_edge(0, 2)

    @given(st.integers(min_value=1, max_value=12), st.integers(min_value=1, max_value=4))
    def test_empty_has_no_edges(self, n, d):
        g = Graph.empty(n, d)
        assert g.n == n
        assert g.d == d
        assert g.edge_count() == 0
        assert g.edges() == []

    @given(st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=25)
    def test_edge_count_matches_edge_list(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, int(rng.integers(2, 15)))
        assert g.edge_count() == len(g.edges())
        assert np.array_equal(g.adjacency, g.adjacency.T)
        assert not np.diag(g.adjacency).any()


class TestDataset:
    def make(self, seed: int = 0, n_items: int = 6) -> Dataset:
        rng = np.random.default_rng(seed)
        items = [
            LabeledGraph(graph=random_graph(rng, int(rng.integers(3, 9))),
                         label=int(rng.integers(0, 2)))
            for _ in range(n_items)
        ]
        return Dataset(items, name="toy", generation_params={"seed": seed})

    def test_basic_accessors(self):
        ds = self.make()
        assert len(ds) == 6
        assert ds.d == 1
        assert ds.labels().shape == (6,)
        assert len(ds.graphs()) == 6
        assert ds[0].graph == ds.graphs()[0]

    def test_inconsistent_feature_dim_rejected(self):
        items = [
            LabeledGraph(graph=new_graph(3, 1), label=0),
            LabeledGraph(graph=new_graph(3, 2), label=1),
        ]
        with pytest.raises(ValueError):
            Dataset(items, name="bad")

    def test_save_load_round_trip(self, tmp_path):
        ds = self.make(seed=3)
        p = tmp_path / "ds.jsonl"
        save_dataset(ds, p)
        back = load_dataset(p)
        assert back.name == ds.name
        assert back.generation_params == ds.generation_params
        assert len(back) == len(ds)
        for a, b in zip(ds, back):
            assert a.label == b.label
            assert a.graph == b.graph

    def test_round_trip_preserves_instance_order(self, tmp_path):
        ds = self.make(seed=9, n_items=10)
        p = tmp_path / "ds.jsonl"
        save_dataset(ds, p)
        back = load_dataset(p)
        assert [it.label for it in back] == [it.label for it in ds]
        assert [it.graph.edge_count() for it in back] == [
            it.graph.edge_count() for it in ds
        ]

    def test_save_is_deterministic(self, tmp_path):
        ds = self.make(seed=5)
        p1 = tmp_path / "a.jsonl"
        p2 = tmp_path / "b.jsonl"
        save_dataset(ds, p1)
        save_dataset(ds, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_load_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text("not a dataset\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(p)

    def test_load_rejects_truncated_header(self, tmp_path):
        ds = self.make()
        p = tmp_path / "ds.jsonl"
        save_dataset(ds, p)
        lines = p.read_text().splitlines()
        p.write_text("\n".join(lines[1:]) + "\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(p)


class TestKFold:
    def make(self, n_items: int) -> Dataset:
        rng = np.random.default_rng(1)
        items = [
            LabeledGraph(graph=random_graph(rng, 5), label=i % 2)
            for i in range(n_items)
        ]
        return Dataset(items, name="toy")

    def test_partition_property(self):
        ds = self.make(23)
        folds = kfold_split(ds, 5, seed=0)
        seen = np.concatenate([folds.test_indices(f) for f in range(5)])
        assert sorted(seen.tolist()) == list(range(23))

    def test_train_test_disjoint_and_complete(self):
        ds = self.make(20)
        folds = kfold_split(ds, 4, seed=7)
        for f in range(4):
            tr = set(folds.train_indices(f).tolist())
            te = set(folds.test_indices(f).tolist())
            assert not (tr & te)
            assert tr | te == set(range(20))

    def test_fold_sizes_balanced(self):
        ds = self.make(23)
        folds = kfold_split(ds, 5, seed=0)
        sizes = folds.fold_sizes()
        assert sizes.sum() == 23
        assert sizes.max() - sizes.min() <= 1

    def test_deterministic_in_seed(self):
        ds = self.make(17)
        a = kfold_split(ds, 4, seed=3)
        b = kfold_split(ds, 4, seed=3)
        c = kfold_split(ds, 4, seed=4)
        assert np.array_equal(a.membership, b.membership)
        assert not np.array_equal(a.membership, c.membership)

    def test_k_larger_than_dataset_rejected(self):
        ds = self.make(3)
        with pytest.raises(ValueError):
            kfold_split(ds, 5, seed=0)

    @given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=100))
    @settings(max_examples=20)
    def test_membership_matches_test_indices(self, k, seed):
        ds = self.make(k * 3 + 1)
        folds = kfold_split(ds, k, seed=seed)
        for f in range(k):
            member = np.flatnonzero(folds.membership == f)
            assert np.array_equal(np.sort(folds.test_indices(f)), member)
