"""Graph construction, triangle counting, and feature extraction.

Triangle counts are checked against a brute-force triple enumeration so the
CSR intersection path never drifts from the definition.
"""

import itertools
import random

import numpy as np
import pytest

from conftest import graph_from_edges, random_graph
from nectarml.graph import (
    EdgeListError,
    Graph,
    extract_features,
    load_edge_list,
    triangle_stats,
)


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

def brute_triangles(g: Graph):
    """Enumerate all C(n,3) triples; return (per-node counts, total)."""
    per_node = [0] * g.n
    total = 0
    for a, b, c in itertools.combinations(range(g.n), 3):
        if g.has_edge(a, b) and g.has_edge(a, c) and g.has_edge(b, c):
            total += 1
            per_node[a] += 1
            per_node[b] += 1
            per_node[c] += 1
    return per_node, total


def brute_partners(g: Graph, v: int):
    """Neighbors of v sharing at least one common neighbor with v."""
    out = []
    nb_v = set(int(x) for x in g.neighbors(v))
    for u in sorted(nb_v):
        if nb_v & set(int(x) for x in g.neighbors(u)):
            out.append(u)
    return out


# ---------------------------------------------------------------------------
# construction and edge-list parsing
# ---------------------------------------------------------------------------

def test_construction_drops_self_loops_and_duplicates():
    g = graph_from_edges(3, [(0, 1), (1, 0), (0, 0), (1, 2), (1, 2)])
    assert g.n == 3
    assert g.m == 2
    assert list(g.neighbors(1)) == [0, 2]


def test_neighbors_sorted_and_degree_consistent():
    rng = random.Random(7)
    g = random_graph(rng, 25, 0.2)
    for v in range(g.n):
        nb = g.neighbors(v)
        assert list(nb) == sorted(nb)
        assert g.degree(v) == len(nb)
    assert int(g.degrees.sum()) == 2 * g.m


def test_load_edge_list_basic(tmp_path):
    p = tmp_path / "toy.edges"
    p.write_text("# comment line\n1 2\n2 3\n\n3 1\n1 1\n2 1\n")
    g = load_edge_list(p)
    assert g.n == 3
    assert g.m == 3  # self-loop and duplicate dropped
    assert g.labels == ["1", "2", "3"]  # order of first appearance
    assert g.label_index["3"] == 2


def test_load_edge_list_malformed_reports_line_number(tmp_path):
    p = tmp_path / "bad.edges"
    p.write_text("1 2\n3 4 5\n")
    with pytest.raises(EdgeListError, match="bad.edges:2"):
        load_edge_list(p)


def test_load_edge_list_missing_file():
    with pytest.raises(EdgeListError):
        load_edge_list("/nonexistent/nowhere.edges")


def test_load_edge_list_string_labels(tmp_path):
    p = tmp_path / "named.edges"
    p.write_text("alice bob\nbob carol\n")
    g = load_edge_list(p)
    assert g.labels == ["alice", "bob", "carol"]
    assert g.has_edge(0, 1) and g.has_edge(1, 2) and not g.has_edge(0, 2)


# ---------------------------------------------------------------------------
# triangle statistics
# ---------------------------------------------------------------------------

def test_triangle_stats_k3():
    g = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
    st = triangle_stats(g)
    assert st.total_triangles == 1
    assert list(st.triangles_per_node) == [1, 1, 1]
    assert st.triplet_count == 3
    assert st.nodes_in_triangles == 3


def test_triangle_stats_path():
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    st = triangle_stats(g)
    assert st.total_triangles == 0
    assert st.triplet_count == 1
    assert st.nodes_in_triangles == 0


def test_triangle_stats_k4():
    g = graph_from_edges(4, list(itertools.combinations(range(4), 2)))
    st = triangle_stats(g)
    assert st.total_triangles == 4
    assert list(st.triangles_per_node) == [3, 3, 3, 3]
    assert st.triplet_count == 12


def test_triangle_stats_matches_bruteforce():
    rng = random.Random(42)
    for trial in range(30):
        n = rng.randint(2, 16)
        g = random_graph(rng, n, rng.uniform(0.05, 0.7))
        per_node, total = brute_triangles(g)
        st = triangle_stats(g)
        assert st.total_triangles == total
        assert list(st.triangles_per_node) == per_node
        assert st.nodes_in_triangles == sum(1 for c in per_node if c > 0)


def test_triangle_partners_matches_bruteforce():
    rng = random.Random(3)
    for trial in range(20):
        g = random_graph(rng, rng.randint(2, 14), rng.uniform(0.1, 0.7))
        for v in range(g.n):
            assert list(g.triangle_partners(v)) == brute_partners(g, v)


# ---------------------------------------------------------------------------
# feature extraction
# ---------------------------------------------------------------------------

def test_features_k4_minus_edge():
    # K4 with edge (2,3) removed: 2 triangles, 8 triplets.
    g = graph_from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)])
    f = extract_features(g)
    assert f.gcc == pytest.approx(0.75)
    assert f.acc == pytest.approx(5.0 / 6.0)
    assert f.ratio_nodes_in_triangle == pytest.approx(1.0)
    assert f.average_node_degree == pytest.approx(2 * 5 / 4)
    assert f.average_triangles_rate == pytest.approx(0.5)


def test_features_triangle_free():
    g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    f = extract_features(g)
    assert f.gcc == 0.0
    assert f.acc == 0.0
    assert f.ratio_nodes_in_triangle == 0.0
    assert f.average_triangles_rate == 0.0


def test_features_empty_graph_conventions():
    g = graph_from_edges(3, [])
    f = extract_features(g)
    assert f.as_array().tolist() == [0.0, 0.0, 0.0, 0.0, 0.0]


def test_features_permutation_invariant():
    rng = random.Random(11)
    for trial in range(10):
        n = rng.randint(4, 14)
        g = random_graph(rng, n, 0.4)
        perm = list(range(n))
        rng.shuffle(perm)
        g2 = Graph(n, [(perm[u], perm[v]) for u, v in g.edges()])
        assert np.allclose(extract_features(g).as_array(),
                           extract_features(g2).as_array())


def test_features_complete_graph():
    g = graph_from_edges(5, list(itertools.combinations(range(5), 2)))
    f = extract_features(g)
    assert f.gcc == pytest.approx(1.0)
    assert f.acc == pytest.approx(1.0)
    assert f.average_node_degree == pytest.approx(4.0)
