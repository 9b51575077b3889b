"""Cover-agreement metrics: ONMI, Omega index, average F1, best-match subset.

All functions accept covers as either Cover objects or iterables of node
collections; nodes may be any hashable ids as long as both covers and the
universe share the space. Nodes outside every community simply count as
belonging to zero communities.

ONMI follows the normalized-conditional-entropy form of Lancichinetti,
Fortunato and Kertesz: per community the best admissible counterpart is
chosen, where admissibility discards counterparts whose match is explained
better by complementation; communities with zero marginal entropy contribute
a zero term.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterable

from .cover import Cover


class MetricKind(str, enum.Enum):
    ONMI = "onmi"
    OMEGA = "omega"
    AVG_F1 = "avgf1"
    METRICS_AVERAGE = "average"


@dataclass(frozen=True)
class ScoreReport:
    onmi: float
    omega: float
    avg_f1: float
    metrics_average: float

    def get(self, kind: MetricKind) -> float:
        return {
            MetricKind.ONMI: self.onmi,
            MetricKind.OMEGA: self.omega,
            MetricKind.AVG_F1: self.avg_f1,
            MetricKind.METRICS_AVERAGE: self.metrics_average,
        }[kind]


def _sets(cover) -> list[frozenset]:
    if isinstance(cover, Cover):
        return [frozenset(s) for s in cover.node_sets()]
    return [frozenset(s) for s in cover]


def _h(p: float) -> float:
    return -p * math.log(p) if p > 0.0 else 0.0


# ---------------------------------------------------------------------------
# ONMI
# ---------------------------------------------------------------------------

def _half_onmi(xs: list[frozenset], ys: list[frozenset], n: int) -> float:
    """Mean normalized H(X_i | Y) over the communities of the first cover.

    Both marginal terms are evaluated from the raw counts so that a
    self-match cancels exactly and identical covers score exactly 1.0.
    """
    total = 0.0
    for x in xs:
        hx = _h(len(x) / n) + _h((n - len(x)) / n)
        if hx == 0.0:
            continue  # marginal entropy zero: the term carries no signal
        best = None
        for y in ys:
            d = len(x & y)
            c = len(x) - d
            b = len(y) - d
            a = n - len(x) - len(y) + d
            ha, hb, hc, hd = (_h(a / n), _h(b / n), _h(c / n), _h(d / n))
            if hd + ha < hb + hc:
                continue  # complement explains the overlap better; unreliable
            h_cond = (ha + hb + hc + hd) - (_h(len(y) / n) + _h((n - len(y)) / n))
            if best is None or h_cond < best:
                best = h_cond
        if best is None:
            best = hx
        total += best / hx
    return total / len(xs)


def onmi(c1, c2, universe: Iterable) -> float:
    """Overlapping NMI: 1 - mean of the two normalized conditional entropies."""
    xs, ys = _sets(c1), _sets(c2)
    uni = set(universe)
    n = len(uni)
    if not xs or not ys:
        raise ValueError("onmi is undefined for an empty cover")
    if n == 0:
        raise ValueError("onmi requires a non-empty universe")
    for s in xs + ys:
        if not s:
            raise ValueError("onmi is undefined for empty communities")
        if not s <= uni:
            raise ValueError("community contains nodes outside the universe")
    value = 1.0 - 0.5 * (_half_onmi(xs, ys, n) + _half_onmi(ys, xs, n))
    return min(1.0, max(0.0, value))


# ---------------------------------------------------------------------------
# Omega index
# ---------------------------------------------------------------------------

def _pair_counts(sets: list[frozenset]) -> dict[tuple, int]:
    counts: dict[tuple, int] = {}
    for s in sets:
        members = sorted(s)
        for pair in itertools.combinations(members, 2):
            counts[pair] = counts.get(pair, 0) + 1
    return counts


def omega_index(c1, c2, universe: Iterable) -> float:
    """Chance-corrected agreement on per-pair co-membership multiplicity."""
    xs, ys = _sets(c1), _sets(c2)
    uni = sorted(set(universe))
    n = len(uni)
    if n < 2:
        raise ValueError("omega requires a universe of at least 2 nodes")
    total_pairs = n * (n - 1) // 2

    cnt1, cnt2 = _pair_counts(xs), _pair_counts(ys)
    keys = set(cnt1) | set(cnt2)
    agree = total_pairs - len(keys)  # pairs at multiplicity 0 in both
    for p in keys:
        if cnt1.get(p, 0) == cnt2.get(p, 0):
            agree += 1
    omega_u = agree / total_pairs

    sizes1: dict[int, int] = {0: total_pairs - len(cnt1)}
    for j in cnt1.values():
        sizes1[j] = sizes1.get(j, 0) + 1
    sizes2: dict[int, int] = {0: total_pairs - len(cnt2)}
    for j in cnt2.values():
        sizes2[j] = sizes2.get(j, 0) + 1
    omega_e = sum(sizes1.get(j, 0) * sizes2.get(j, 0) for j in set(sizes1) | set(sizes2))
    omega_e /= total_pairs * total_pairs

    if omega_e == 1.0:
        if omega_u == 1.0:
            return 1.0
        raise ValueError("degenerate null model")
    return (omega_u - omega_e) / (1.0 - omega_e)


# ---------------------------------------------------------------------------
# Average F1
# ---------------------------------------------------------------------------

def _f1(a: frozenset, b: frozenset) -> float:
    inter = len(a & b)
    if inter == 0:
        return 0.0
    precision = inter / len(a)
    recall = inter / len(b)
    return 2.0 * precision * recall / (precision + recall)


def average_f1(c1, c2) -> float:
    """Symmetric mean of best-match F1 in both directions."""
    xs, ys = _sets(c1), _sets(c2)
    if not xs or not ys:
        raise ValueError("average_f1 requires two non-empty covers")
    fwd = sum(max(_f1(x, y) for y in ys) for x in xs)
    bwd = sum(max(_f1(y, x) for x in xs) for y in ys)
    return fwd / (2.0 * len(xs)) + bwd / (2.0 * len(ys))


def best_match_subset(ground_truth, detected) -> list[set]:
    """F1-best detected community per ground-truth community, deduplicated.

    Ties go to the earliest community in the detected cover's canonical
    order, so the subset is deterministic.
    """
    gts = _sets(ground_truth)
    dets = sorted(_sets(detected), key=sorted)
    if not dets:
        raise ValueError("detected cover is empty")
    picked: dict[frozenset, None] = {}
    for gt in gts:
        best = max(dets, key=lambda d: _f1(gt, d))
        picked.setdefault(best)
    return [set(s) for s in picked]


# ---------------------------------------------------------------------------
# combined scoring
# ---------------------------------------------------------------------------

def score(c_detected, c_truth, universe: Iterable, use_best_match: bool = False) -> ScoreReport:
    """All three metrics plus their mean for one detected-vs-truth pair.

    With use_best_match, the detected cover is first reduced to the
    per-truth-community best matches (the real-world evaluation procedure);
    otherwise covers are compared as given.
    """
    detected = _sets(c_detected)
    truth = _sets(c_truth)
    if use_best_match:
        detected = [frozenset(s) for s in best_match_subset(truth, detected)]
    o = onmi(detected, truth, universe)
    w = omega_index(detected, truth, universe)
    f = average_f1(detected, truth)
    return ScoreReport(onmi=o, omega=w, avg_f1=f, metrics_average=(o + w + f) / 3.0)
