"""Objective functions over overlapping covers and their exact join gains.

Two node-centric objectives are provided:

* qe: modularity extended to overlaps. Every ordered member pair (i, j) of a
  community contributes (A_ij - k_i k_j / 2m) scaled by 1/(O_i O_j), where
  O_x is the number of communities holding x. Nodes outside every community
  are treated as singletons. On a disjoint cover this reduces to plain
  Newman modularity.

* wocc: community-weighted closure. WCC(x, C) compares the triangles x
  closes inside C against all its triangles, damped by how many non-members
  still close triangles with x. Triangle partnership (adjacent plus at least
  one common neighbor anywhere) is a static property of the graph.

The delta_* functions return the exact change of the global objective when a
node currently outside every community joins one candidate community; they
are algebraic reductions of the global difference, not approximations.
"""

from __future__ import annotations

import enum

import numpy as np

from .cover import Cover
from .graph import Graph


class Objective(str, enum.Enum):
    QE = "qe"
    WOCC = "wocc"


# ---------------------------------------------------------------------------
# extended modularity
# ---------------------------------------------------------------------------

def qe_global(g: Graph, cover: Cover) -> float:
    """Extended modularity of a cover; 0.0 for edgeless graphs."""
    m = g.m
    if m == 0:
        return 0.0
    o = np.array([len(s) for s in cover.memberships], dtype=np.float64)
    o[o == 0] = 1.0  # uncovered nodes enter as singletons
    inv_o = 1.0 / o
    k_over_o = g.degrees * inv_o

    total = 0.0
    for members in cover.communities.values():
        idx = np.fromiter(members, dtype=np.int64, count=len(members))
        idx.sort()
        a_term = 0.0
        for i in idx:
            inside = np.intersect1d(g.neighbors(int(i)), idx, assume_unique=True)
            a_term += inv_o[i] * float(inv_o[inside].sum())
        s_c = float(k_over_o[idx].sum())
        total += a_term - s_c * s_c / (2.0 * m)
    # singleton terms of uncovered nodes have no A part
    for v in range(g.n):
        if not cover.memberships[v]:
            kv = float(g.degrees[v])
            total -= kv * kv / (2.0 * m)
    return total / (2.0 * m)


def delta_qe(g: Graph, cover: Cover, v: int, cid: int) -> float:
    """Gain of qe_global when v (outside all communities) joins community cid.

    Requires cover.memberships[v] to be empty; the joined node carries a
    membership count of 1 on both sides of the difference, so the singleton
    degree term cancels exactly.
    """
    m = g.m
    if m == 0:
        return 0.0
    members = cover.communities[cid]
    nb = g.neighbors(v)
    adj_sum = 0.0
    for j in nb:
        if int(j) in members:
            adj_sum += 1.0 / len(cover.memberships[int(j)])
    s_c = 0.0
    for j in members:
        s_c += g.degrees[j] / len(cover.memberships[j])
    return (adj_sum - float(g.degrees[v]) * s_c / (2.0 * m)) / m


# ---------------------------------------------------------------------------
# weighted overlapping closure
# ---------------------------------------------------------------------------

def _t_in(g: Graph, members: np.ndarray, x: int) -> int:
    """Triangles x closes with two members (x itself excluded from members)."""
    nb_in = np.intersect1d(g.neighbors(x), members, assume_unique=True)
    if len(nb_in) < 2:
        return 0
    tot = 0
    for y in nb_in:
        tot += len(np.intersect1d(g.neighbors(int(y)), nb_in, assume_unique=True))
    return tot // 2


def _wcc(g: Graph, x: int, t_in: int, others: int, tp_in: int) -> float:
    """WCC(x, C) from precounted pieces.

    t_in: triangles of x inside C. others: |C \\ {x}|. tp_in: triangle
    partners of x inside C \\ {x}.
    """
    t_all = int(g.triangle_index().triangles_per_node[x])
    if t_all == 0:
        return 0.0
    vt_all = len(g.triangle_partners(x))
    denom = others + (vt_all - tp_in)
    if denom == 0:
        return 0.0
    return (t_in / t_all) * (vt_all / denom)


def wcc_node(g: Graph, cover: Cover, x: int, cid: int) -> float:
    members = cover.communities[cid]
    arr = np.fromiter((m for m in members if m != x), dtype=np.int64, count=len(members) - (1 if x in members else 0))
    arr.sort()
    t_in = _t_in(g, arr, x)
    tp_in = len(np.intersect1d(g.triangle_partners(x), arr, assume_unique=True))
    return _wcc(g, x, t_in, len(arr), tp_in)


def wocc_global(g: Graph, cover: Cover) -> float:
    """Cover-level WOCC: per-node WCC sums, discounted by membership count."""
    if g.n == 0:
        return 0.0
    total = 0.0
    for x in range(g.n):
        cids = cover.memberships[x]
        if not cids:
            continue
        inner = 0.0
        for cid in cids:
            inner += wcc_node(g, cover, x, cid)
        total += inner / len(cids)
    return total / g.n


def delta_wocc(g: Graph, cover: Cover, v: int, cid: int) -> float:
    """Gain of wocc_global when v (outside all communities) joins cid.

    The join creates one WCC term for v and perturbs every existing member
    x of C: the triangle count of x grows by the triangles closed through v,
    and the denominator |C'\\{x}| + vt(x, V\\C') shifts by 1 - tp(x, v).
    Terms of nodes outside C and of other communities are untouched.
    """
    if g.n == 0:
        return 0.0
    members = cover.communities[cid]
    arr = np.fromiter(members, dtype=np.int64, count=len(members))
    arr.sort()
    s = len(arr)

    nb_v = g.neighbors(v)
    in_nb = np.intersect1d(nb_v, arr, assume_unique=True)  # members adjacent to v
    partners_v = g.triangle_partners(v)
    tp_v_in = np.intersect1d(partners_v, arr, assume_unique=True)

    # triangles v gains inside C, and per-member triangle increments
    delta_t = {}
    t_v = 0
    for x in in_nb:
        dt = len(np.intersect1d(g.neighbors(int(x)), in_nb, assume_unique=True))
        delta_t[int(x)] = dt
        t_v += dt
    t_v //= 2

    vt_v_all = len(partners_v)
    new_term = _wcc(g, v, t_v, s, len(tp_v_in))

    tp_set = set(int(x) for x in tp_v_in)
    member_shift = 0.0
    for x in arr:
        xi = int(x)
        rest = arr[arr != x]
        t_old = _t_in(g, rest, xi)
        tp_old = len(np.intersect1d(g.triangle_partners(xi), rest, assume_unique=True))
        old = _wcc(g, xi, t_old, s - 1, tp_old)
        new = _wcc(g, xi, t_old + delta_t.get(xi, 0), s, tp_old + (1 if xi in tp_set else 0))
        member_shift += (new - old) / len(cover.memberships[xi])
    return (new_term + member_shift) / g.n


# ---------------------------------------------------------------------------
# shared entry points
# ---------------------------------------------------------------------------

def objective_global(g: Graph, cover: Cover, objective: Objective) -> float:
    if objective is Objective.QE:
        return qe_global(g, cover)
    return wocc_global(g, cover)


def delta_gain(g: Graph, cover: Cover, v: int, cid: int, objective: Objective) -> float:
    if objective is Objective.QE:
        return delta_qe(g, cover, v, cid)
    return delta_wocc(g, cover, v, cid)


def neighboring_communities(g: Graph, cover: Cover, v: int) -> set[int]:
    """Ids of communities containing at least one neighbor of v."""
    out: set[int] = set()
    for u in g.neighbors(v):
        out |= cover.memberships[int(u)]
    return out
