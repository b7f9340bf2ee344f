"""Raster rendering of explanation results.

Every test instance becomes an n-by-n pixel block (one pixel per
adjacency entry): black for an edge kept by the explainer, red for a
removed edge, green for an added edge, white where neither graph has an
edge. Failed explanations render as all-white blocks. Blocks tile into a
grid of folds (rows) by instances (columns) with a one-pixel gray
separator, emitted as an uncompressed binary portable pixmap so repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .graphs import Dataset
from .metrics import ResultRow

WHITE = (255, 255, 255)
RED = (255, 0, 0)
GREEN = (0, 255, 0)
BLACK = (0, 0, 0)
SEPARATOR = (128, 128, 128)


class RenderError(ValueError):
    pass


def _candidate_adjacency(a: np.ndarray, row: ResultRow) -> np.ndarray:
    cand = a.copy()
    for u, v in row.added:
        cand[u, v] = cand[v, u] = 1.0
    for u, v in row.removed:
        cand[u, v] = cand[v, u] = 0.0
    return cand


def render_cell(a: np.ndarray, row: ResultRow) -> np.ndarray:
    """Pixel block for one instance; asserts the color-count identity."""
    n = a.shape[0]
    cell = np.empty((n, n, 3), dtype=np.uint8)
    cell[:] = WHITE
    if not row.valid:
        return cell
    cand = _candidate_adjacency(a, row)
    cell[(a > 0) & (cand > 0)] = BLACK
    cell[(a > 0) & (cand == 0)] = RED
    cell[(a == 0) & (cand > 0)] = GREEN
    greens = int((cell == GREEN).all(axis=2).sum())
    reds = int((cell == RED).all(axis=2).sum())
    blacks = int((cell == BLACK).all(axis=2).sum())
    assert (greens + reds) / 2 == row.ged, \
        f"instance {row.instance_id}: pixel count disagrees with ged"
    assert blacks / 2 == int(a.sum() / 2) - len(row.removed)
    return cell


def render_pictorial(rows: list[ResultRow], ds: Dataset, out_path=None) -> bytes:
    """Compose the fold-by-instance grid; returns (and optionally writes)
    the image bytes."""
    if not rows:
        raise RenderError("no result rows to render")
    for r in rows:
        if not 0 <= r.instance_id < len(ds):
            raise RenderError(f"row references unknown instance {r.instance_id}")
    sizes = {ds[r.instance_id].graph.n for r in rows}
    if len(sizes) != 1:
        raise RenderError(
            f"instances have inconsistent node counts {sorted(sizes)}; "
            "cells must share one size")
    n = sizes.pop()

    by_fold: dict[int, list[ResultRow]] = {}
    for r in rows:
        by_fold.setdefault(r.fold, []).append(r)
    fold_ids = sorted(by_fold)
    ncols = max(len(v) for v in by_fold.values())
    height = len(fold_ids) * (n + 1) + 1
    width = ncols * (n + 1) + 1
    canvas = np.empty((height, width, 3), dtype=np.uint8)
    canvas[:] = SEPARATOR
    for r_idx, fold in enumerate(fold_ids):
        for c_idx, row in enumerate(by_fold[fold]):
            a = ds[row.instance_id].graph.adjacency
            top = 1 + r_idx * (n + 1)
            left = 1 + c_idx * (n + 1)
            canvas[top:top + n, left:left + n] = render_cell(a, row)

    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    blob = header + canvas.tobytes()
    if out_path is not None:
        with open(out_path, "wb") as fh:
            fh.write(blob)
    return blob
