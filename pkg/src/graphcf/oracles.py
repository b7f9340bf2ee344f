"""Black-box prediction layer with per-call accounting.

Two oracle kinds are provided: an exact cycle detector (perfect on the
tree/cycle benchmark) and a trained GCN classifier. Every ``predict``
increments a monotone call counter; the evaluation harness measures an
explainer's oracle usage as the counter delta over an explicit window.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from .graphs import Dataset, Graph


def contains_cycle(adjacency: np.ndarray) -> bool:
    """True iff the undirected graph has a cycle.

    Iterative depth-first search with parent tracking, run over every
    connected component.
    """
    n = adjacency.shape[0]
    neighbors = [np.flatnonzero(adjacency[i]) for i in range(n)]
    seen = np.zeros(n, dtype=bool)
    for root in range(n):
        if seen[root]:
            continue
        stack = [(root, -1)]
        seen[root] = True
        while stack:
            node, parent = stack.pop()
            for nb in neighbors[node]:
                if nb == parent:
                    continue
                if seen[nb]:
                    return True
                seen[nb] = True
                stack.append((int(nb), node))
    return False


class OracleNotReadyError(RuntimeError):
    """Prediction requested from an oracle that has not been trained."""


class CallWindow:
    """Counter delta over one explanation episode; closed by the context."""

    def __init__(self, oracle: "Oracle"):
        self._oracle = oracle
        self.start = oracle.calls
        self.calls: int | None = None

    @property
    def so_far(self) -> int:
        return self._oracle.calls - self.start


class Oracle:
    """Base black-box classifier with an atomic monotone call counter."""

    kind = "abstract"

    def __init__(self):
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def predict(self, g: Graph) -> int:
        with self._lock:
            self._calls += 1
        return self._predict(g)

    def _predict(self, g: Graph) -> int:
        raise NotImplementedError

    # Locks do not pickle; worker processes get their own fresh lock (the
    # counter is per-process, windows never span processes).
    def __getstate__(self):
        state = {k: v for k, v in self.__dict__.items() if k != "_lock"}
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @contextmanager
    def call_window(self):
        """Open an accounting window; ``window.calls`` is valid on exit."""
        w = CallWindow(self)
        try:
            yield w
        finally:
            w.calls = self._calls - w.start


class CycleOracle(Oracle):
    """Exact oracle: class 1 iff the graph contains a cycle."""

    kind = "exact-cycle"

    def _predict(self, g: Graph) -> int:
        return int(contains_cycle(g.adjacency))


class GcnOracle(Oracle):
    """Trained GCN classifier behind the oracle interface.

    Built by :func:`train_gcn_oracle`; ``classifier`` is a fitted
    :class:`graphcf.estimators.GcnGraphClassifier`.
    """

    kind = "trained-gcn"

    def __init__(self, classifier=None):
        super().__init__()
        self.classifier = classifier

    def _predict(self, g: Graph) -> int:
        if self.classifier is None or not getattr(self.classifier, "is_fitted_", False):
            raise OracleNotReadyError("trained-gcn oracle used before training")
        return int(self.classifier.predict_one(g))


def oracle_accuracy(oracle: Oracle, ds: Dataset) -> float:
    """Mean agreement between oracle predictions and dataset labels.

    These calls are bookkeeping, not explanation work: run it outside any
    call window so it cannot pollute the explainer's oracle-call metric.
    """
    if len(ds) == 0:
        raise ValueError("cannot score an oracle on an empty dataset")
    hits = sum(int(oracle.predict(lg.graph) == lg.label) for lg in ds)
    return hits / len(ds)


def train_gcn_oracle(ds: Dataset, train_indices, config=None, seed: int = 0):
    """Train a GCN oracle on the given instances; returns the oracle.

    The fitted classifier's held-out accuracy over the remaining instances
    is stored on the returned oracle as ``heldout_accuracy``. Training data
    must contain both classes.
    """
    from .estimators import GcnGraphClassifier

    train_indices = np.asarray(train_indices, dtype=int)
    graphs = [ds[i].graph for i in train_indices]
    y = np.array([ds[i].label for i in train_indices], dtype=int)
    if len(set(y.tolist())) < 2:
        raise ValueError("oracle training data must contain both classes")
    params = dict(config or {})
    params.setdefault("seed", seed)
    clf = GcnGraphClassifier(**params)
    clf.fit(graphs, y)
    oracle = GcnOracle(clf)
    held = np.setdiff1d(np.arange(len(ds)), train_indices)
    if held.size:
        hits = sum(int(clf.predict_one(ds[i].graph) == ds[i].label) for i in held)
        oracle.heldout_accuracy = hits / held.size
    else:
        oracle.heldout_accuracy = None
    return oracle
