"""Node-centric detection loop: seeding, sweeps, beta rule, merging.

One run alternates external iterations over a seeded node shuffle. Per node:
leave all current communities, score every neighboring community with the
active objective's exact join gain, re-enter all communities whose gain times
beta reaches the maximum (provided that maximum is positive), otherwise fall
back to a singleton. After each sweep, communities overlapping by at least
alpha (relative to the smaller one) are merged. The run stops when a full
sweep leaves every node's membership unchanged and the merge removes nothing,
or after max_iter iterations.

Gain evaluation is incremental: per-community aggregates (degree sums for the
modularity objective; per-member triangle tallies for the closure objective)
are maintained across node moves and rebuilt after merges. A reference mode
recomputes every gain from scratch; tests drive both and demand identical
covers.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

import numpy as np

from .cover import Cover
from .graph import Graph, extract_features
from .objectives import (
    Objective,
    delta_gain,
    neighboring_communities,
    objective_global,
)


class ObjectiveMode(str, enum.Enum):
    FORCE_QE = "force_qe"
    FORCE_WOCC = "force_wocc"
    THRESHOLD = "threshold"
    MODEL = "model"


@dataclass(frozen=True)
class EngineConfig:
    beta: float
    alpha: float = 0.8
    max_iter: int = 20
    objective_mode: ObjectiveMode = ObjectiveMode.THRESHOLD
    tr_rate: float = 5.0
    model_path: str | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.beta < 1.0:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class RunResult:
    cover: Cover
    iterations_used: int
    converged: bool
    objective_chosen: Objective
    objective_value: float


def select_objective(g: Graph, config: EngineConfig, classifier=None) -> Objective:
    """Pick the objective: forced, triangle-rate threshold, or model vote."""
    mode = config.objective_mode
    if mode is ObjectiveMode.FORCE_QE:
        return Objective.QE
    if mode is ObjectiveMode.FORCE_WOCC:
        return Objective.WOCC
    feats = extract_features(g)
    if mode is ObjectiveMode.THRESHOLD:
        return Objective.WOCC if feats.average_triangles_rate >= config.tr_rate else Objective.QE
    if classifier is None:
        raise ValueError("model routing requires a loaded classifier")
    from .classifier import predict

    kind, _prob = predict(classifier, feats)
    return kind


def initialize_cover(g: Graph, rng_seed: int = 0, alpha: float = 0.8) -> Cover:
    """Seed one community per closed neighborhood, dedupe, merge once.

    The rule is deterministic; rng_seed is accepted for interface symmetry
    with run() but unused.
    """
    del rng_seed
    seen: dict[frozenset, None] = {}
    for v in range(g.n):
        seed = frozenset((v, *map(int, g.neighbors(v))))
        seen.setdefault(seed)
    cover = Cover.from_node_sets(g.n, list(seen))
    merged, _ = merge_cover(cover, alpha)
    return merged


def merge_cover(cover: Cover, alpha: float) -> tuple[Cover, bool]:
    """Fuse overlapping communities until no pair qualifies.

    A pair qualifies when |C1 n C2| / min(|C1|, |C2|) >= alpha. Pairs are
    scanned by ascending (smaller size, smaller id, larger id) and the scan
    restarts after every merge; the surviving community keeps the smaller id.
    Returns the (possibly new) cover and whether the count decreased.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    out = cover.copy()
    merged_any = False
    while True:
        ids = sorted(out.communities)
        pairs = []
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                pairs.append((min(out.size(a), out.size(b)), a, b))
        pairs.sort()
        hit = None
        for msize, a, b in pairs:
            inter = len(out.communities[a] & out.communities[b])
            if inter / msize >= alpha:
                hit = (a, b)
                break
        if hit is None:
            return out, merged_any
        a, b = hit
        absorbed = list(out.communities[b])
        out.dissolve(b)
        for v in absorbed:
            if v not in out.communities[a]:
                out.add(v, a)
        merged_any = True


# ---------------------------------------------------------------------------
# incremental gain state
# ---------------------------------------------------------------------------

class _ReferenceState:
    """Trivial evaluator: every gain recomputed from the definitions."""

    def __init__(self, g: Graph, cover: Cover, objective: Objective):
        self.g = g
        self.cover = cover
        self.objective = objective

    def refresh(self):
        pass

    def rebind(self, cover: Cover):
        self.cover = cover

    def detach(self, v: int) -> set[int]:
        emptied = set()
        for cid in list(self.cover.memberships[v]):
            if self.cover.remove(v, cid):
                emptied.add(cid)
        return emptied

    def attach(self, v: int, cids: set[int]):
        for cid in cids:
            self.cover.add(v, cid)

    def singleton(self, v: int, reuse_cid: int | None) -> int:
        return self.cover.new_community({v}, cid=reuse_cid)

    def gains(self, v: int, cids) -> dict[int, float]:
        return {cid: delta_gain(self.g, self.cover, v, cid, self.objective) for cid in cids}


class _QEState(_ReferenceState):
    """Caches per-community sum of degree/membership-count ratios."""

    def __init__(self, g: Graph, cover: Cover, objective: Objective):
        super().__init__(g, cover, objective)
        self.s: dict[int, float] = {}
        self.refresh()

    def refresh(self):
        deg = self.g.degrees
        ms = self.cover.memberships
        self.s = {
            cid: float(sum(deg[j] / len(ms[j]) for j in members))
            for cid, members in self.cover.communities.items()
        }

    def rebind(self, cover: Cover):
        self.cover = cover
        self.refresh()

    def detach(self, v: int) -> set[int]:
        old = list(self.cover.memberships[v])
        t = len(old)
        kv = float(self.g.degrees[v])
        emptied = set()
        for cid in old:
            self.s[cid] -= kv / t
            if self.cover.remove(v, cid):
                del self.s[cid]
                emptied.add(cid)
        return emptied

    def attach(self, v: int, cids: set[int]):
        kv = float(self.g.degrees[v])
        t = len(cids)
        for cid in cids:
            self.cover.add(v, cid)
            self.s[cid] += kv / t

    def singleton(self, v: int, reuse_cid: int | None) -> int:
        cid = self.cover.new_community({v}, cid=reuse_cid)
        self.s[cid] = float(self.g.degrees[v])
        return cid

    def gains(self, v: int, cids) -> dict[int, float]:
        m = self.g.m
        if m == 0:
            return {cid: 0.0 for cid in cids}
        ms = self.cover.memberships
        wanted = set(cids)
        adj: dict[int, float] = {cid: 0.0 for cid in cids}
        for u in self.g.neighbors(v):
            ui = int(u)
            o_u = len(ms[ui])
            if not o_u:
                continue
            w = 1.0 / o_u
            for cid in ms[ui]:
                if cid in wanted:
                    adj[cid] += w
        kv = float(self.g.degrees[v])
        return {cid: (adj[cid] - kv * self.s[cid] / (2.0 * m)) / m for cid in cids}


class _WOCCState(_ReferenceState):
    """Caches per-member in-community triangle and partner tallies.

    All cached quantities are integers, so incremental updates are exact.
    """

    def __init__(self, g: Graph, cover: Cover, objective: Objective):
        super().__init__(g, cover, objective)
        stats = g.triangle_index()
        self.t_all = stats.triangles_per_node.astype(np.float64)
        self.vt_all = np.array([len(g.triangle_partners(v)) for v in range(g.n)], dtype=np.float64)
        self.t_in: dict[int, dict[int, int]] = {}
        self.tp_in: dict[int, dict[int, int]] = {}
        self.refresh()

    def refresh(self):
        self.t_in = {}
        self.tp_in = {}
        for cid, members in self.cover.communities.items():
            self._build(cid, members)

    def _build(self, cid: int, members) -> None:
        arr = np.fromiter(members, dtype=np.int64, count=len(members))
        arr.sort()
        t_in: dict[int, int] = {}
        tp_in: dict[int, int] = {}
        for x in arr:
            xi = int(x)
            rest = arr[arr != x]
            nb_in = np.intersect1d(self.g.neighbors(xi), rest, assume_unique=True)
            tri = 0
            for y in nb_in:
                tri += len(np.intersect1d(self.g.neighbors(int(y)), nb_in, assume_unique=True))
            t_in[xi] = tri // 2
            tp_in[xi] = len(np.intersect1d(self.g.triangle_partners(xi), rest, assume_unique=True))
        self.t_in[cid] = t_in
        self.tp_in[cid] = tp_in

    def rebind(self, cover: Cover):
        self.cover = cover
        self.refresh()

    def _member_deltas(self, v: int, members_sorted: np.ndarray):
        """Per-member triangle increments caused by v, and v's own tallies."""
        in_nb = np.intersect1d(self.g.neighbors(v), members_sorted, assume_unique=True)
        delta_t: dict[int, int] = {}
        t_v = 0
        for x in in_nb:
            dt = len(np.intersect1d(self.g.neighbors(int(x)), in_nb, assume_unique=True))
            delta_t[int(x)] = dt
            t_v += dt
        tp_v = np.intersect1d(self.g.triangle_partners(v), members_sorted, assume_unique=True)
        return delta_t, t_v // 2, tp_v

    def detach(self, v: int) -> set[int]:
        emptied = set()
        for cid in list(self.cover.memberships[v]):
            members = self.cover.communities[cid]
            rest = np.fromiter((x for x in members if x != v), dtype=np.int64, count=len(members) - 1)
            rest.sort()
            delta_t, _, tp_v = self._member_deltas(v, rest)
            t_in, tp_in = self.t_in[cid], self.tp_in[cid]
            for x, dt in delta_t.items():
                t_in[x] -= dt
            for x in tp_v:
                tp_in[int(x)] -= 1
            del t_in[v], tp_in[v]
            if self.cover.remove(v, cid):
                del self.t_in[cid], self.tp_in[cid]
                emptied.add(cid)
        return emptied

    def attach(self, v: int, cids: set[int]):
        for cid in cids:
            members = self.cover.communities[cid]
            rest = np.fromiter(members, dtype=np.int64, count=len(members))
            rest.sort()
            delta_t, t_v, tp_v = self._member_deltas(v, rest)
            t_in, tp_in = self.t_in[cid], self.tp_in[cid]
            for x, dt in delta_t.items():
                t_in[x] += dt
            for x in tp_v:
                tp_in[int(x)] += 1
            t_in[v] = t_v
            tp_in[v] = len(tp_v)
            self.cover.add(v, cid)

    def singleton(self, v: int, reuse_cid: int | None) -> int:
        cid = self.cover.new_community({v}, cid=reuse_cid)
        self.t_in[cid] = {v: 0}
        self.tp_in[cid] = {v: 0}
        return cid

    def gains(self, v: int, cids) -> dict[int, float]:
        n = self.g.n
        out: dict[int, float] = {}
        t_all_v = self.t_all[v]
        vt_all_v = self.vt_all[v]
        for cid in cids:
            members = self.cover.communities[cid]
            arr = np.fromiter(members, dtype=np.int64, count=len(members))
            arr.sort()
            s = len(arr)
            delta_t, t_v, tp_v = self._member_deltas(v, arr)

            if t_all_v > 0:
                denom_v = s + (vt_all_v - len(tp_v))
                new_term = (t_v / t_all_v) * (vt_all_v / denom_v) if denom_v > 0 else 0.0
            else:
                new_term = 0.0

            t_in_map, tp_in_map = self.t_in[cid], self.tp_in[cid]
            t_in = np.fromiter((t_in_map[int(x)] for x in arr), dtype=np.float64, count=s)
            tp_in = np.fromiter((tp_in_map[int(x)] for x in arr), dtype=np.float64, count=s)
            dt = np.zeros(s, dtype=np.float64)
            if delta_t:
                keys = np.fromiter(delta_t, dtype=np.int64, count=len(delta_t))
                dt[np.searchsorted(arr, keys)] = np.fromiter(delta_t.values(), dtype=np.float64, count=len(delta_t))
            bump = np.zeros(s, dtype=np.float64)
            if len(tp_v):
                bump[np.searchsorted(arr, tp_v)] = 1.0

            t_all = self.t_all[arr]
            vt_all = self.vt_all[arr]
            o = np.fromiter((len(self.cover.memberships[int(x)]) for x in arr), dtype=np.float64, count=s)

            with np.errstate(divide="ignore", invalid="ignore"):
                d_old = (s - 1) + (vt_all - tp_in)
                old = np.where((t_all > 0) & (d_old > 0), t_in / t_all * vt_all / d_old, 0.0)
                d_new = s + (vt_all - tp_in - bump)
                new = np.where((t_all > 0) & (d_new > 0), (t_in + dt) / t_all * vt_all / d_new, 0.0)
            shift = float(((new - old) / o).sum())
            out[cid] = (new_term + shift) / n
        return out


def _make_state(g: Graph, cover: Cover, objective: Objective, reference: bool):
    if reference:
        return _ReferenceState(g, cover, objective)
    if objective is Objective.QE:
        return _QEState(g, cover, objective)
    return _WOCCState(g, cover, objective)


# ---------------------------------------------------------------------------
# the outer loop
# ---------------------------------------------------------------------------

def run(g: Graph, config: EngineConfig, classifier=None, reference_gains: bool = False) -> RunResult:
    """Detect overlapping communities; see module docstring for the loop."""
    objective = select_objective(g, config, classifier)
    cover = initialize_cover(g, config.rng_seed, config.alpha)
    state = _make_state(g, cover, objective, reference_gains)
    rng = random.Random(config.rng_seed)
    order = list(range(g.n))

    iterations = 0
    converged = False
    while iterations < config.max_iter:
        iterations += 1
        rng.shuffle(order)
        state.refresh()  # bound float drift in cached aggregates per sweep
        stable = 0
        for v in order:
            old_ids = frozenset(cover.memberships[v])
            emptied = state.detach(v)
            cands = neighboring_communities(g, cover, v)
            new_ids: frozenset | None = None
            if cands:
                gains = state.gains(v, sorted(cands))
                best = max(gains.values())
                if best > 0.0:
                    new_ids = frozenset(c for c, d in gains.items() if d * config.beta >= best)
                    state.attach(v, set(new_ids))
            if new_ids is None:
                # no positive gain: fall back to a singleton; when v was
                # already alone in a single community, keep its id so the
                # node can count as stable
                reuse = None
                if len(old_ids) == 1:
                    (only,) = old_ids
                    if only in emptied:
                        reuse = only
                cid = state.singleton(v, reuse)
                new_ids = frozenset((cid,))
            if new_ids == old_ids:
                stable += 1
        merged_cover, merged = merge_cover(cover, config.alpha)
        if merged:
            cover = merged_cover
            state.rebind(cover)
            stable = 0
        if stable == g.n:
            converged = True
            break

    value = objective_global(g, cover, objective)
    return RunResult(
        cover=cover,
        iterations_used=iterations,
        converged=converged,
        objective_chosen=objective,
        objective_value=value,
    )
