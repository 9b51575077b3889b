"""Undirected simple graph: ingestion, triangle statistics, structural features.

The graph is immutable after construction and stores adjacency in CSR form
(sorted neighbor lists over dense internal indices). External node labels are
kept in a bidirectional map so that file I/O and metric code can speak in the
original ids while the algorithms run on contiguous integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class EdgeListError(ValueError):
    """Raised for unreadable or malformed edge-list input."""


@dataclass(frozen=True)
class TriangleStats:
    """Exact triangle counts for a graph.

    triangles_per_node[v] is the number of triangles incident to v, so the
    per-node counts sum to 3 * total_triangles. triplet_count is the number
    of connected triples sum_v C(deg(v), 2), open and closed alike.
    """

    triangles_per_node: np.ndarray
    total_triangles: int
    triplet_count: int
    nodes_in_triangles: int


@dataclass(frozen=True)
class FeatureVector:
    """The five structural features used for objective-function selection."""

    gcc: float
    acc: float
    ratio_nodes_in_triangle: float
    average_node_degree: float
    average_triangles_rate: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.gcc,
                self.acc,
                self.ratio_nodes_in_triangle,
                self.average_node_degree,
                self.average_triangles_rate,
            ],
            dtype=np.float64,
        )


FEATURE_NAMES = (
    "gcc",
    "acc",
    "ratio_nodes_in_triangle",
    "avg_degree",
    "avg_triangles_rate",
)


class Graph:
    """Immutable undirected simple graph over dense node indices 0..n-1.

    Safe to share across concurrent readers; all derived indices (triangle
    counts, triangle-partner lists) are computed once and cached.
    """

    def __init__(self, n_nodes: int, edges: Iterable[tuple[int, int]], labels: Sequence[str] | None = None):
        """Build from de-duplicated internal-index edges.

        Self-loops and duplicate/reversed edges are dropped here so callers
        may pass raw pairs. `labels[i]` is the external label of node i;
        defaults to the decimal index.
        """
        self.n = int(n_nodes)
        seen = set()
        for u, v in edges:
            if u == v:
                continue
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for {self.n} nodes")
            seen.add((u, v) if u < v else (v, u))
        self.m = len(seen)

        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in seen:
            deg[u] += 1
            deg[v] += 1
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        nbr = np.zeros(2 * self.m, dtype=np.int64)
        fill = indptr[:-1].copy()
        for u, v in seen:
            nbr[fill[u]] = v
            fill[u] += 1
            nbr[fill[v]] = u
            fill[v] += 1
        for i in range(self.n):
            nbr[indptr[i]:indptr[i + 1]].sort()

        self.indptr = indptr
        self.neighbors_flat = nbr
        self.degrees = deg

        if labels is None:
            labels = [str(i) for i in range(self.n)]
        if len(labels) != self.n:
            raise ValueError("labels length must equal node count")
        self.labels: list[str] = list(labels)
        self.label_index: dict[str, int] = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.label_index) != self.n:
            raise ValueError("duplicate external labels")

        self._tri_stats: TriangleStats | None = None
        self._partner_lists: list[np.ndarray] | None = None

    # -- adjacency access ---------------------------------------------------

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted neighbor array of v (a view; do not mutate)."""
        return self.neighbors_flat[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.degrees[v])

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return i < len(nb) and nb[i] == v

    def edges(self) -> Iterable[tuple[int, int]]:
        """Yield each undirected edge once, as (u, v) with u < v."""
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < v:
                    yield u, int(v)

    # -- triangle machinery --------------------------------------------------

    def triangle_index(self) -> TriangleStats:
        """Cached TriangleStats (computed on first use)."""
        if self._tri_stats is None:
            self._tri_stats = triangle_stats(self)
        return self._tri_stats

    def triangle_partners(self, v: int) -> np.ndarray:
        """Sorted array of neighbors of v that close >=1 triangle with v."""
        if self._partner_lists is None:
            parts: list[list[int]] = [[] for _ in range(self.n)]
            for u in range(self.n):
                nb_u = self.neighbors(u)
                for w in nb_u:
                    if w <= u:
                        continue
                    common = np.intersect1d(nb_u, self.neighbors(int(w)), assume_unique=True)
                    if len(common):
                        parts[u].append(int(w))
                        parts[int(w)].append(u)
            self._partner_lists = [np.array(sorted(p), dtype=np.int64) for p in parts]
        return self._partner_lists[v]

    def to_labels(self, nodes: Iterable[int]) -> list[str]:
        return [self.labels[v] for v in nodes]


def load_edge_list(path) -> Graph:
    """Load a whitespace-delimited edge list into a Graph.

    One edge per line, two tokens; lines starting with '#' are ignored.
    Self-loops and duplicate edges are silently dropped. External labels are
    assigned internal indices in order of first appearance.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise EdgeListError(f"cannot read edge list {path}: {exc}") from exc

    label_index: dict[str, int] = {}
    labels: list[str] = []
    edges: list[tuple[int, int]] = []

    def intern(tok: str) -> int:
        idx = label_index.get(tok)
        if idx is None:
            idx = len(labels)
            label_index[tok] = idx
            labels.append(tok)
        return idx

    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise EdgeListError(f"{path}:{lineno}: expected two node tokens, got {len(parts)}")
        u, v = intern(parts[0]), intern(parts[1])
        if u != v:
            edges.append((u, v))

    return Graph(len(labels), edges, labels)


def save_edge_list(path, g: Graph, header_lines=()) -> None:
    """Write one labeled edge per line, '#' header comments first."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for u, v in g.edges():
            fh.write(f"{g.labels[u]} {g.labels[v]}\n")


def triangle_stats(g: Graph) -> TriangleStats:
    """Exact triangle counts via sorted neighbor-list intersection.

    For every edge (u, v) with u < v the common neighbors w > v are counted,
    so each triangle is found exactly once and credited to all three nodes.
    """
    per_node = np.zeros(g.n, dtype=np.int64)
    total = 0
    for u in range(g.n):
        nb_u = g.neighbors(u)
        higher = nb_u[nb_u > u]
        for v in higher:
            nb_v = g.neighbors(int(v))
            common = np.intersect1d(higher, nb_v[nb_v > v], assume_unique=True)
            c = len(common)
            if c:
                total += c
                per_node[u] += c
                per_node[v] += c
                per_node[common] += 1
    triplets = int(np.sum(g.degrees * (g.degrees - 1) // 2))
    return TriangleStats(
        triangles_per_node=per_node,
        total_triangles=int(total),
        triplet_count=triplets,
        nodes_in_triangles=int(np.count_nonzero(per_node)),
    )


def extract_features(g: Graph) -> FeatureVector:
    """Compute the five structural features of a graph.

    Degenerate cases follow fixed conventions: gcc is 0 when there are no
    connected triples, and the local coefficient of a node with degree <= 1
    is 0.
    """
    if g.n < 1:
        raise ValueError("feature extraction requires at least one node")
    stats = g.triangle_index()

    gcc = 0.0
    if stats.triplet_count > 0:
        gcc = 3.0 * stats.total_triangles / stats.triplet_count

    # Local coefficient: edges among u's neighbors equal triangles at u.
    deg = g.degrees.astype(np.float64)
    pairs = deg * (deg - 1.0)
    local = np.zeros(g.n, dtype=np.float64)
    mask = g.degrees > 1
    local[mask] = 2.0 * stats.triangles_per_node[mask] / pairs[mask]
    acc = float(np.mean(local))

    return FeatureVector(
        gcc=float(gcc),
        acc=acc,
        ratio_nodes_in_triangle=stats.nodes_in_triangles / g.n,
        average_node_degree=2.0 * g.m / g.n,
        average_triangles_rate=stats.total_triangles / g.n,
    )
