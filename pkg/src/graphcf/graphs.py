"""Core graph containers: graphs, labeled datasets, serialization, fold splits.

Graphs are undirected, unweighted, without self-loops. A graph is a pair of
a node-feature matrix (n x d) and a symmetric binary adjacency matrix
(n x n). Instances are immutable after construction; operations that modify
structure return new values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DATASET_SCHEMA = "graphcf-dataset"
DATASET_VERSION = 1


class DatasetFormatError(ValueError):
    """Raised when a dataset file violates the on-disk schema."""


class GraphValidationError(ValueError):
    """Raised when matrices do not form a valid undirected graph."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Graph:
    """Undirected graph with node features and a symmetric adjacency matrix.

    Parameters
    ----------
    node_features : array-like of shape (n, d)
    adjacency : array-like of shape (n, n)
        Must be symmetric with a zero diagonal. Entries of dataset graphs
        are 0 or 1.

    Both arrays are copied and frozen; a ``Graph`` never mutates.
    """

    __slots__ = ("node_features", "adjacency")

    def __init__(self, node_features, adjacency, *, validate: bool = True):
        x = np.array(node_features, dtype=float)
        a = np.array(adjacency, dtype=float)
        if validate:
            _validate_graph(x, a)
        self.node_features = _freeze(x)
        self.adjacency = _freeze(a)

    @classmethod
    def _wrap(cls, node_features: np.ndarray, adjacency: np.ndarray) -> "Graph":
        """Internal no-copy, no-validation constructor for hot paths.

        The caller retains responsibility for the invariants; the sampler
        uses this to expose a candidate adjacency under construction to the
        oracle without an O(n^2) copy per query.
        """
        g = cls.__new__(cls)
        g.node_features = node_features
        g.adjacency = adjacency
        return g

    @classmethod
    def empty(cls, n: int, d: int) -> "Graph":
        """A graph with ``n`` isolated nodes and ``d`` zero features."""
        if n < 1 or d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        return cls(np.zeros((n, d)), np.zeros((n, n)), validate=False)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def d(self) -> int:
        return self.node_features.shape[1]

    def add_edge(self, u: int, v: int) -> "Graph":
        """Return a new graph with the undirected edge (u, v) present.

        Adding an existing edge is a no-op (idempotent). Self-loops and
        out-of-range indices are rejected.
        """
        n = self.n
        if u == v:
            raise GraphValidationError(f"self-loop ({u}, {v}) not allowed")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphValidationError(f"edge ({u}, {v}) out of range for n={n}")
        a = self.adjacency.copy()
        a[u, v] = a[v, u] = 1.0
        return Graph(self.node_features, a, validate=False)

    def edge_count(self) -> int:
        """Number of undirected edges |E|."""
        return int(round(self.adjacency.sum() / 2.0))

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges in canonical (u < v) lexicographic order."""
        iu, iv = np.nonzero(np.triu(self.adjacency))
        return list(zip(iu.tolist(), iv.tolist()))

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency) and np.array_equal(
            self.node_features, other.node_features
        )

    def __hash__(self):
        return hash((self.n, self.d, self.adjacency.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, d={self.d}, edges={self.edge_count()})"


def _validate_graph(x: np.ndarray, a: np.ndarray) -> None:
    if x.ndim != 2 or a.ndim != 2:
        raise GraphValidationError("features and adjacency must be 2-D")
    n = a.shape[0]
    if a.shape != (n, n):
        raise GraphValidationError(f"adjacency must be square, got {a.shape}")
    if x.shape[0] != n:
        raise GraphValidationError(
            f"feature rows ({x.shape[0]}) must match node count ({n})"
        )
    if n < 1 or x.shape[1] < 1:
        raise GraphValidationError("need at least one node and one feature")
    if not np.array_equal(a, a.T):
        raise GraphValidationError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0):
        raise GraphValidationError("adjacency diagonal must be zero")
    if not np.all((a == 0) | (a == 1)):
        raise GraphValidationError("dataset adjacency entries must be 0 or 1")


def new_graph(n: int, d: int) -> Graph:
    """Zero-feature, edgeless graph; rejects n = 0 or d = 0."""
    return Graph.empty(n, d)


@dataclass(frozen=True)
class LabeledGraph:
    """A graph with its binary class label."""

    graph: Graph
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass
class Dataset:
    """Ordered collection of labeled graphs sharing a feature dimension."""

    instances: tuple[LabeledGraph, ...]
    name: str = "dataset"
    generation_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.instances = tuple(self.instances)
        dims = {lg.graph.d for lg in self.instances}
        if len(dims) > 1:
            raise ValueError(f"instances disagree on feature dimension: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.instances)

    def __getitem__(self, i: int) -> LabeledGraph:
        return self.instances[i]

    def __iter__(self):
        return iter(self.instances)

    @property
    def d(self) -> int:
        return self.instances[0].graph.d if self.instances else 0

    def labels(self) -> np.ndarray:
        return np.array([lg.label for lg in self.instances], dtype=int)

    def graphs(self) -> list[Graph]:
        return [lg.graph for lg in self.instances]


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def save_dataset(ds: Dataset, path) -> None:
    """Write ``ds`` as line-delimited JSON: one header record, then one
    record per instance with label, node count, canonical (u < v) edge
    list, and the per-node feature table.

    ``load_dataset(save_dataset(ds))`` reproduces ``ds`` exactly, and a
    second save produces a byte-identical file.
    """
    header = {
        "schema": DATASET_SCHEMA,
        "version": DATASET_VERSION,
        "name": ds.name,
        "d": ds.d,
        "count": len(ds),
        "params": ds.generation_params,
    }
    lines = [_canonical_json(header)]
    for lg in ds.instances:
        g = lg.graph
        rec = {
            "label": int(lg.label),
            "n": g.n,
            "edges": [[int(u), int(v)] for u, v in g.edges()],
            "x": [[float(v) for v in row] for row in g.node_features],
        }
        lines.append(_canonical_json(rec))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    """Read a dataset file written by :func:`save_dataset`.

    Raises ``DatasetFormatError`` on schema mismatch, on edges that are
    not in canonical undirected form (u < v, no duplicates, no
    self-loops), or on malformed records.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{path}: bad header: {e}") from e
    if header.get("schema") != DATASET_SCHEMA:
        raise DatasetFormatError(f"{path}: not a {DATASET_SCHEMA} file")
    if header.get("version") != DATASET_VERSION:
        raise DatasetFormatError(
            f"{path}: schema version {header.get('version')} != {DATASET_VERSION}"
        )
    d = int(header["d"])
    count = int(header["count"])
    if len(lines) - 1 != count:
        raise DatasetFormatError(
            f"{path}: header promises {count} instances, file has {len(lines) - 1}"
        )
    instances = []
    for idx, line in enumerate(lines[1:]):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"{path}: instance {idx}: bad record: {e}") from e
        n = int(rec["n"])
        x = np.array(rec["x"], dtype=float)
        if x.shape != (n, d):
            raise DatasetFormatError(
                f"{path}: instance {idx}: feature table shape {x.shape} != ({n}, {d})"
            )
        a = np.zeros((n, n))
        seen = set()
        for u, v in rec["edges"]:
            if not (0 <= u < v < n):
                raise DatasetFormatError(
                    f"{path}: instance {idx}: edge ({u}, {v}) violates the "
                    "canonical undirected form (0 <= u < v < n); the file does "
                    "not encode a symmetric self-loop-free adjacency"
                )
            if (u, v) in seen:
                raise DatasetFormatError(
                    f"{path}: instance {idx}: duplicate edge ({u}, {v})"
                )
            seen.add((u, v))
            a[u, v] = a[v, u] = 1.0
        instances.append(LabeledGraph(Graph(x, a, validate=False), int(rec["label"])))
    return Dataset(tuple(instances), name=header["name"], generation_params=header["params"])


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of instance indices into k folds.

    ``membership[i]`` is the fold of instance i. Fold sizes differ by at
    most one, and per-class counts are balanced across folds to within one
    instance (stratification).
    """

    k: int
    membership: np.ndarray

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.membership == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.membership != fold)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.membership, minlength=self.k)


def kfold_split(ds: Dataset, k: int, seed: int) -> FoldAssignment:
    """Deterministic stratified k-fold assignment.

    Instances are shuffled within each class with a seeded RNG,
    concatenated class-major, and dealt round-robin over folds. Dealing
    over consecutive positions bounds both the total fold sizes and the
    per-class fold counts to within one of each other.
    """
    n = len(ds)
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds dataset size {n}")
    labels = ds.labels()
    rng = np.random.default_rng(seed)
    membership = np.empty(n, dtype=int)
    pos = 0
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for i in idx:
            membership[i] = pos % k
            pos += 1
    return FoldAssignment(k=k, membership=membership)
