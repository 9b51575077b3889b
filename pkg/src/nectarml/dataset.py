"""Labeling pipeline: run both objectives over the beta grid and persist rows.

Every network is detected 2 x |betas| times (each objective forced, per beta
value) and scored against its ground truth. Per metric, the best score per
objective across the grid decides the label; the relative score gap becomes
the network weight used later as a sample weight. Records are processed with
bounded parallelism but always written in manifest order, and every engine
run derives its seed from (base seed, network id, objective, beta) through
sha256, so results do not depend on scheduling or grid order.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .cover import Cover, cover_from_label_sets, load_community_file
from .engine import EngineConfig, ObjectiveMode, run
from .graph import FEATURE_NAMES, FeatureVector, Graph, extract_features, load_edge_list
from .metrics import MetricKind, score
from .objectives import Objective

DEFAULT_BETAS = (1.01, 1.05, 1.09, 1.1, 1.2, 1.3, 1.4, 1.6, 1.8, 2.0)

LFR_COLUMNS = ("n", "k", "maxK", "On", "Om", "mut")

# parameter grids of the reference synthetic corpus; tags outside these are
# treated as custom, not rejected
REFERENCE_GRIDS = {
    "n": {float(v) for v in range(10000, 70000, 5000)},
    "k": {10.0, 20.0, 40.0, 60.0, 80.0},
    "maxK": {50.0, 100.0, 120.0},
    "On": {0.1, 0.25, 0.5, 0.75},
    "Om": {float(v) for v in range(2, 11)},
    "mut": {0.1, 0.2, 0.3, 0.4, 0.5},
}

DATASET_COLUMNS = (
    "id", *FEATURE_NAMES, "metric", "label", "weight", "split",
    *LFR_COLUMNS, "best_qe", "best_wocc",
)

METRIC_ORDER = (MetricKind.ONMI, MetricKind.OMEGA, MetricKind.AVG_F1, MetricKind.METRICS_AVERAGE)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary parts (never Python's hash())."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class NetworkRecord:
    id: str
    graph_path: str
    truth_path: str
    lfr: dict[str, float] = field(default_factory=dict)
    features: FeatureVector | None = None

    def lfr_within_grids(self) -> bool | None:
        """True/False for tagged records, None when untagged."""
        if not self.lfr:
            return None
        return all(v in REFERENCE_GRIDS[k] for k, v in self.lfr.items())


@dataclass(frozen=True)
class PerMetricLabel:
    best_qe: float
    best_wocc: float
    label: Objective
    weight: float


@dataclass
class LabeledNetwork:
    record: NetworkRecord
    n_nodes: int
    per_metric: dict[MetricKind, PerMetricLabel]


@dataclass(frozen=True)
class BetaGrid:
    values: tuple[float, ...] = DEFAULT_BETAS

    def __post_init__(self):
        if not self.values:
            raise ValueError("beta grid cannot be empty")
        if any(b < 1.0 for b in self.values):
            raise ValueError("all beta values must be >= 1")


def eq_weight(best_qe: float, best_wocc: float) -> tuple[Objective, float]:
    """Label and relative-gap weight from the two best scores.

    Ties (and the all-zero case) label the majority class with weight 0. A
    negative losing score (possible with the omega metric) is clamped so the
    weight stays within [0, 1].
    """
    label = Objective.WOCC if best_wocc > best_qe else Objective.QE
    hi = max(best_qe, best_wocc)
    if hi <= 0.0:
        return label, 0.0
    return label, min(1.0, abs(best_wocc - best_qe) / hi)


# ---------------------------------------------------------------------------
# labeling
# ---------------------------------------------------------------------------

def label_network(
    record: NetworkRecord,
    betas: BetaGrid,
    base_config: EngineConfig,
    use_best_match: bool = False,
) -> LabeledNetwork:
    """Score both objectives over the grid and label the record per metric."""
    g = load_edge_list(record.graph_path)
    truth_sets = load_community_file(record.truth_path)
    truth = cover_from_label_sets(truth_sets, g)
    if record.features is None:
        record.features = extract_features(g)

    best: dict[tuple[Objective, MetricKind], float] = {}
    for objective, mode in ((Objective.QE, ObjectiveMode.FORCE_QE),
                            (Objective.WOCC, ObjectiveMode.FORCE_WOCC)):
        for beta in betas.values:
            config = dataclasses.replace(
                base_config,
                beta=beta,
                objective_mode=mode,
                rng_seed=derive_seed(base_config.rng_seed, record.id, objective.value, beta),
            )
            result = run(g, config)
            report = score(result.cover, truth, range(g.n), use_best_match=use_best_match)
            for kind in METRIC_ORDER:
                key = (objective, kind)
                value = report.get(kind)
                if key not in best or value > best[key]:
                    best[key] = value

    per_metric: dict[MetricKind, PerMetricLabel] = {}
    for kind in METRIC_ORDER:
        bq = best[(Objective.QE, kind)]
        bw = best[(Objective.WOCC, kind)]
        label, weight = eq_weight(bq, bw)
        per_metric[kind] = PerMetricLabel(best_qe=bq, best_wocc=bw, label=label, weight=weight)
    return LabeledNetwork(record=record, n_nodes=g.n, per_metric=per_metric)


# ---------------------------------------------------------------------------
# planted-overlap generator (desk-scale stand-in for external benchmarks)
# ---------------------------------------------------------------------------

def generate_test_network(
    n: int,
    communities: int,
    overlap_fraction: float,
    p_in: float,
    p_out: float,
    seed: int,
) -> tuple[Graph, Cover]:
    """Planted overlapping partition with independent edge sampling.

    Nodes are split into near-equal contiguous blocks; a seeded sample of
    round(overlap_fraction * n) nodes joins one extra block. Each node pair
    is then wired with probability p_in when the two share a block and p_out
    otherwise.
    """
    if communities < 1 or n < communities:
        raise ValueError(f"infeasible sizes: n={n}, communities={communities}")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if not (0.0 <= overlap_fraction < 1.0):
        raise ValueError(f"overlap_fraction must be in [0,1), got {overlap_fraction}")

    rng = random.Random(seed)
    base = n // communities
    extra = n % communities
    membership: list[set[int]] = []
    blocks: list[set[int]] = [set() for _ in range(communities)]
    node = 0
    for c in range(communities):
        size = base + (1 if c < extra else 0)
        for _ in range(size):
            membership.append({c})
            blocks[c].add(node)
            node += 1

    n_overlap = int(round(overlap_fraction * n))
    if communities > 1 and n_overlap:
        for v in sorted(rng.sample(range(n), n_overlap)):
            (home,) = membership[v]
            second = rng.choice([c for c in range(communities) if c != home])
            membership[v].add(second)
            blocks[second].add(v)

    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            p = p_in if membership[u] & membership[v] else p_out
            if rng.random() < p:
                edges.append((u, v))
    return Graph(n, edges), Cover.from_node_sets(n, blocks)


# ---------------------------------------------------------------------------
# manifest and dataset files
# ---------------------------------------------------------------------------

class ManifestError(ValueError):
    pass


def load_manifest(path) -> list[NetworkRecord]:
    """Comma-delimited manifest; graph/truth paths resolve relative to it."""
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.DictReader(filter(lambda ln: not ln.startswith("#"), fh))]
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    records = []
    for i, row in enumerate(rows, start=2):
        for col in ("id", "graph_path", "truth_path"):
            if not row.get(col):
                raise ManifestError(f"{path}: row {i} missing column {col!r}")
        lfr = {}
        for col in LFR_COLUMNS:
            raw = (row.get(col) or "").strip()
            if raw:
                try:
                    lfr[col] = float(raw)
                except ValueError as exc:
                    raise ManifestError(f"{path}: row {i} bad {col}={raw!r}") from exc
        records.append(NetworkRecord(
            id=row["id"],
            graph_path=os.path.join(base_dir, row["graph_path"]),
            truth_path=os.path.join(base_dir, row["truth_path"]),
            lfr=lfr,
        ))
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ManifestError(f"{path}: duplicate network ids")
    return records


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def dataset_rows(labeled: LabeledNetwork, split_threshold: int) -> list[list[str]]:
    """One output row per metric for a labeled network."""
    rec = labeled.record
    assert rec.features is not None
    feats = [_fmt(v) for v in rec.features.as_array()]
    split = "train" if labeled.n_nodes <= split_threshold else "test"
    tags = [(_fmt(rec.lfr[c]) if c in rec.lfr else "") for c in LFR_COLUMNS]
    rows = []
    for kind in METRIC_ORDER:
        pm = labeled.per_metric[kind]
        rows.append([
            rec.id, *feats, kind.value, pm.label.value, _fmt(pm.weight), split,
            *tags, _fmt(pm.best_qe), _fmt(pm.best_wocc),
        ])
    return rows


def write_dataset(
    path,
    labeled: Sequence[LabeledNetwork],
    failures: Sequence[tuple[str, str]] = (),
    header_lines: Sequence[str] = (),
    split_threshold: int = 50000,
) -> int:
    written = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_COLUMNS)
        for ln in labeled:
            for row in dataset_rows(ln, split_threshold):
                writer.writerow(row)
                written += 1
        for rid, msg in failures:
            fh.write(f"# failed id={rid} error={msg}\n")
    return written


@dataclass
class DatasetRow:
    id: str
    features: np.ndarray
    metric: MetricKind
    label: Objective
    weight: float
    split: str
    lfr: dict[str, float]
    best_qe: float
    best_wocc: float


def load_dataset(path, metric: MetricKind | None = None) -> list[DatasetRow]:
    """Read dataset rows, optionally filtered to one metric."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(filter(lambda ln: not ln.startswith("#"), fh))
        out = []
        for row in reader:
            kind = MetricKind(row["metric"])
            if metric is not None and kind is not metric:
                continue
            lfr = {c: float(row[c]) for c in LFR_COLUMNS if row.get(c)}
            out.append(DatasetRow(
                id=row["id"],
                features=np.array([float(row[name]) for name in FEATURE_NAMES]),
                metric=kind,
                label=Objective(row["label"]),
                weight=float(row["weight"]),
                split=row["split"],
                lfr=lfr,
                best_qe=float(row["best_qe"]),
                best_wocc=float(row["best_wocc"]),
            ))
    return out


# ---------------------------------------------------------------------------
# batch build
# ---------------------------------------------------------------------------

def _label_worker(args) -> tuple[str, LabeledNetwork | None, str | None]:
    record, betas, base_config, use_best_match = args
    try:
        return record.id, label_network(record, betas, base_config, use_best_match), None
    except Exception as exc:  # noqa: BLE001 - per-record failures must not kill the batch
        return record.id, None, f"{type(exc).__name__}: {exc}"


def build_dataset(
    manifest_path,
    betas: BetaGrid,
    out_path,
    base_config: EngineConfig,
    workers: int = 1,
    split_threshold: int = 50000,
    use_best_match: bool = False,
    header_lines: Sequence[str] = (),
    progress=None,
) -> tuple[int, list[tuple[str, str]]]:
    """Label every manifest record and write the dataset file.

    Returns (rows written, failures). Output order follows the manifest
    regardless of worker scheduling.
    """
    records = load_manifest(manifest_path)
    jobs = [(rec, betas, base_config, use_best_match) for rec in records]

    results: list[tuple[str, LabeledNetwork | None, str | None]] = []
    if workers <= 1:
        for job in jobs:
            results.append(_label_worker(job))
            if progress:
                progress(results[-1][0])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_label_worker, jobs):
                results.append(res)
                if progress:
                    progress(res[0])

    labeled = [ln for _, ln, err in results if err is None and ln is not None]
    failures = [(rid, err) for rid, _, err in results if err is not None]
    written = write_dataset(out_path, labeled, failures, header_lines, split_threshold)
    return written, failures


# ---------------------------------------------------------------------------
# real-world preprocessing
# ---------------------------------------------------------------------------

def prune_graph(g: Graph, community_labels: Iterable[Sequence[str]]) -> Graph:
    """Drop nodes (and incident edges) that appear in no listed community."""
    keep = set()
    for comm in community_labels:
        for lab in comm:
            idx = g.label_index.get(lab)
            if idx is not None:
                keep.add(idx)
    kept_sorted = sorted(keep)
    remap = {old: new for new, old in enumerate(kept_sorted)}
    edges = [(remap[u], remap[v]) for u, v in g.edges() if u in keep and v in keep]
    labels = [g.labels[old] for old in kept_sorted]
    return Graph(len(kept_sorted), edges, labels)
