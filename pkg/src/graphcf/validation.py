"""Input validation for the estimator entry points."""

from __future__ import annotations

import numpy as np

from .graphs import Graph


def check_graph(g) -> Graph:
    if not isinstance(g, Graph):
        raise TypeError(
            f"expected a Graph, got {type(g).__name__}; wrap raw arrays "
            "with graphcf.Graph(node_features, adjacency)"
        )
    return g


def check_graph_list(X) -> list[Graph]:
    graphs = [check_graph(g) for g in X]
    if not graphs:
        raise ValueError("empty graph collection")
    dims = {g.d for g in graphs}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions {sorted(dims)}")
    return graphs


def check_binary_labels(y, n_samples: int) -> np.ndarray:
    arr = np.asarray(y)
    if arr.shape != (n_samples,):
        raise ValueError(
            f"labels have shape {arr.shape}, expected ({n_samples},)")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return arr.astype(int)
