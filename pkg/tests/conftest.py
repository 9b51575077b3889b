"""Shared helpers for the test suite: small random-graph builders."""

import random

from nectarml.graph import Graph


def random_graph(rng: random.Random, n: int, p: float) -> Graph:
    """Erdos-Renyi G(n, p) over internal indices 0..n-1."""
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.append((u, v))
    return Graph(n, edges)


def graph_from_edges(n: int, edges) -> Graph:
    return Graph(n, list(edges))
