"""Explanation-quality metrics and the cross-validated evaluation driver.

Since the sampler preserves node identity and count, graph edit distance
reduces to the number of differing unordered pairs (unit-cost edge flips
under the identity node mapping). A failed explanation returns the input
itself, so it scores distance 0 and correctness 0; aggregates are taken
over all instances, then averaged with a standard error across folds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .graphs import Dataset, FoldAssignment, Graph, _canonical_json
from .oracles import Oracle
from .sampler import SamplerConfig, edge_diff, explain
from .training import TrainedPair, derive_seed

CANDIDATES_SCHEMA = "graphcf-candidates"
CANDIDATES_VERSION = 1
REPORT_MAGIC = "graphcf-report 1"

METRIC_NAMES = ("runtime_s", "ged", "oracle_calls", "correctness",
                "sparsity", "fidelity", "oracle_accuracy")


class MissingCheckpointError(LookupError):
    pass


def ged(g: Graph, g_prime: Graph) -> float:
    """Unit-cost edge edit distance under the identity node mapping."""
    if g.n != g_prime.n:
        raise ValueError(
            f"node-count mismatch: {g.n} vs {g_prime.n} "
            "(candidates must preserve the node set)"
        )
    return float(np.abs(g.adjacency - g_prime.adjacency).sum()) / 2.0


def sparsity(g: Graph, g_prime: Graph) -> float:
    """Edit distance normalized by instance size, n + |E(g)|."""
    return ged(g, g_prime) / (g.n + g.edge_count())


def fidelity(chi: int, oracle_on_prime_equals_y: int) -> int:
    """chi - I[oracle(candidate) = label]; disentangles explainer failure
    (0) from oracle error on the input (-1)."""
    if chi not in (0, 1) or oracle_on_prime_equals_y not in (0, 1):
        raise ValueError("fidelity inputs must be 0 or 1")
    return chi - oracle_on_prime_equals_y


@dataclass(frozen=True)
class ResultRow:
    instance_id: int
    fold: int
    valid: bool
    runtime_s: float
    ged: float
    sparsity: float
    oracle_calls: int
    guarded_calls: int
    correctness: int
    fidelity: int
    oracle_correct: int
    added: tuple[tuple[int, int], ...]
    removed: tuple[tuple[int, int], ...]


@dataclass
class AggregateReport:
    k: int
    means: dict[str, float]
    ses: dict[str, float]
    config_echo: dict | None = None


def _row_value(row: ResultRow, name: str) -> float:
    if name == "oracle_accuracy":
        return float(row.oracle_correct)
    return float(getattr(row, name))


def aggregate(rows: list[ResultRow], k: int,
              config_echo: dict | None = None) -> AggregateReport:
    """Fold-mean then mean +- standard error across the k folds."""
    if not rows:
        raise ValueError("no rows to aggregate")
    by_fold: dict[int, list[ResultRow]] = {}
    for r in rows:
        by_fold.setdefault(r.fold, []).append(r)
    means: dict[str, float] = {}
    ses: dict[str, float] = {}
    for name in METRIC_NAMES:
        fold_means = np.array([
            np.mean([_row_value(r, name) for r in by_fold[f]])
            for f in sorted(by_fold)
        ])
        means[name] = float(fold_means.mean())
        ses[name] = (float(fold_means.std(ddof=1) / np.sqrt(len(fold_means)))
                     if len(fold_means) > 1 else 0.0)
    return AggregateReport(k=k, means=means, ses=ses, config_echo=config_echo)


def _score_instance(instance_id: int, fold: int, g: Graph, label: int,
                    input_class: int, output_class: int, candidate: Graph,
                    valid: bool, runtime_s: float, oracle_calls: int,
                    guarded_calls: int) -> ResultRow:
    chi = int(input_class == label)
    correctness = int(output_class != input_class)
    fid = fidelity(chi, int(output_class == label))
    added, removed = edge_diff(g.adjacency, candidate.adjacency)
    return ResultRow(
        instance_id=instance_id, fold=fold, valid=valid,
        runtime_s=runtime_s,
        ged=ged(g, candidate), sparsity=sparsity(g, candidate),
        oracle_calls=oracle_calls, guarded_calls=guarded_calls,
        correctness=correctness, fidelity=fid, oracle_correct=chi,
        added=added, removed=removed,
    )


def _evaluate_fold(fold: int, ds: Dataset, test_indices,
                   fold_models: dict[int, TrainedPair], oracle: Oracle,
                   cfg: SamplerConfig, record_runtime: bool) -> list[ResultRow]:
    rows = []
    for i in test_indices:
        inst = ds[int(i)]
        g = inst.graph
        # Selecting the per-class generator is evaluation bookkeeping;
        # the call inside explain() is the one the metric window counts.
        input_class = oracle.predict(g)
        if input_class not in fold_models:
            raise MissingCheckpointError(
                f"missing checkpoint for fold {fold}, class {input_class}")
        pair = fold_models[input_class]
        rng = np.random.default_rng(derive_seed(cfg.seed, fold, int(i)))
        rec = explain(g, pair.generator, oracle, cfg, rng=rng)
        rows.append(_score_instance(
            int(i), fold, g, inst.label, rec.input_class, rec.output_class,
            rec.candidate, rec.valid,
            rec.runtime_s if record_runtime else 0.0,
            rec.oracle_calls, rec.guarded_calls,
        ))
    return rows


def evaluate(ds: Dataset, folds: FoldAssignment, oracle: Oracle,
             models: dict[tuple[int, int], TrainedPair],
             cfg: SamplerConfig, n_jobs: int = 1,
             record_runtime: bool = True,
             config_echo: dict | None = None):
    """Explain every test instance of every fold; returns (report, rows)."""
    jobs = []
    for f in range(folds.k):
        fold_models = {c: pair for (ff, c), pair in models.items() if ff == f}
        if not fold_models:
            raise MissingCheckpointError(f"no checkpoints for fold {f}")
        jobs.append((f, ds, folds.test_indices(f), fold_models, oracle,
                     cfg, record_runtime))
    results = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_fold)(*job) for job in jobs)
    rows = [r for fold_rows in results for r in fold_rows]
    return aggregate(rows, folds.k, config_echo), rows


# ---- external-candidate mode --------------------------------------------

def save_candidates(path, candidates: dict[int, list[tuple[int, int]]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_canonical_json({
            "schema": CANDIDATES_SCHEMA, "version": CANDIDATES_VERSION,
        }) + "\n")
        for instance_id in sorted(candidates):
            edges = sorted((int(u), int(v)) for u, v in candidates[instance_id])
            fh.write(_canonical_json({
                "instance": int(instance_id),
                "edges": [list(e) for e in edges],
            }) + "\n")


def load_candidates(path) -> dict[int, list[tuple[int, int]]]:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("schema") != CANDIDATES_SCHEMA:
            raise ValueError(f"{path}: not a candidates file")
        if header.get("version") != CANDIDATES_VERSION:
            raise ValueError(f"{path}: unsupported version")
        out: dict[int, list[tuple[int, int]]] = {}
        for line in fh:
            rec = json.loads(line)
            out[int(rec["instance"])] = [
                (int(u), int(v)) for u, v in rec["edges"]]
    return out


def _graph_from_edges(template: Graph, edges) -> Graph:
    a = np.zeros((template.n, template.n))
    for u, v in edges:
        a[u, v] = a[v, u] = 1.0
    return Graph(template.node_features, a)


def evaluate_candidates(ds: Dataset, folds: FoldAssignment, oracle: Oracle,
                        candidates: dict[int, list[tuple[int, int]]],
                        config_echo: dict | None = None):
    """Score externally produced candidates; the sampler never runs.

    Instances absent from the candidate map fall back to the input
    (scored as failed explanations).
    """
    rows = []
    for f in range(folds.k):
        for i in folds.test_indices(f):
            inst = ds[int(i)]
            g = inst.graph
            with oracle.call_window() as window:
                input_class = oracle.predict(g)
                if int(i) in candidates:
                    candidate = _graph_from_edges(g, candidates[int(i)])
                    output_class = oracle.predict(candidate)
                else:
                    candidate, output_class = g, input_class
            rows.append(_score_instance(
                int(i), f, g, inst.label, input_class, output_class,
                candidate, output_class != input_class,
                0.0, window.calls, 0,
            ))
    return aggregate(rows, folds.k, config_echo), rows


# ---- delimited writers ---------------------------------------------------

_ROW_HEADER = ("instance\tfold\tvalid\truntime_s\tged\tsparsity\t"
               "oracle_calls\tguarded_calls\tcorrectness\tfidelity\t"
               "oracle_correct\tedits")


def _encode_edits(row: ResultRow) -> str:
    ops = [f"+{u}:{v}" for u, v in row.added]
    ops += [f"-{u}:{v}" for u, v in row.removed]
    return ",".join(ops)


def _decode_edits(text: str):
    added, removed = [], []
    if text:
        for op in text.split(","):
            u, v = op[1:].split(":")
            (added if op[0] == "+" else removed).append((int(u), int(v)))
    return tuple(added), tuple(removed)


def write_rows(path, rows: list[ResultRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_ROW_HEADER + "\n")
        for r in rows:
            fh.write("\t".join([
                str(r.instance_id), str(r.fold), str(int(r.valid)),
                f"{r.runtime_s:.17g}", f"{r.ged:.10g}", f"{r.sparsity:.17g}",
                str(r.oracle_calls), str(r.guarded_calls),
                str(r.correctness), str(r.fidelity), str(r.oracle_correct),
                _encode_edits(r),
            ]) + "\n")


def read_rows(path) -> list[ResultRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != _ROW_HEADER:
            raise ValueError(f"{path}: unexpected results header")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 12:
                raise ValueError(f"{path}: malformed row: {line!r}")
            added, removed = _decode_edits(parts[11])
            rows.append(ResultRow(
                instance_id=int(parts[0]), fold=int(parts[1]),
                valid=bool(int(parts[2])), runtime_s=float(parts[3]),
                ged=float(parts[4]), sparsity=float(parts[5]),
                oracle_calls=int(parts[6]), guarded_calls=int(parts[7]),
                correctness=int(parts[8]), fidelity=int(parts[9]),
                oracle_correct=int(parts[10]), added=added, removed=removed,
            ))
    return rows


def write_report(path, report: AggregateReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(REPORT_MAGIC + "\n")
        fh.write(f"folds\t{report.k}\n")
        fh.write("metric\tmean\tse\n")
        for name in METRIC_NAMES:
            fh.write(f"{name}\t{report.means[name]:.6f}\t"
                     f"{report.ses[name]:.6f}\n")


def read_report(path) -> AggregateReport:
    with open(path, encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != REPORT_MAGIC:
            raise ValueError(f"{path}: not a report file")
        k = int(fh.readline().split("\t")[1])
        fh.readline()
        means, ses = {}, {}
        for line in fh:
            name, mean, se = line.rstrip("\n").split("\t")
            means[name] = float(mean)
            ses[name] = float(se)
    return AggregateReport(k=k, means=means, ses=ses)
