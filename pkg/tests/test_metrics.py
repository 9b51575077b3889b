"""Agreement metrics against brute-force pair enumeration and hand fixtures."""

import itertools
import random

import pytest

from nectarml.metrics import (
    MetricKind,
    ScoreReport,
    average_f1,
    best_match_subset,
    omega_index,
    onmi,
    score,
)


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def brute_omega(sets1, sets2, universe):
    """Count per-pair multiplicities by scanning every community per pair."""
    uni = sorted(universe)
    pairs = list(itertools.combinations(uni, 2))
    agree = 0
    hist1, hist2 = {}, {}
    for u, v in pairs:
        j1 = sum(1 for s in sets1 if u in s and v in s)
        j2 = sum(1 for s in sets2 if u in s and v in s)
        if j1 == j2:
            agree += 1
        hist1[j1] = hist1.get(j1, 0) + 1
        hist2[j2] = hist2.get(j2, 0) + 1
    p = len(pairs)
    omega_u = agree / p
    omega_e = sum(hist1.get(j, 0) * hist2.get(j, 0) for j in set(hist1) | set(hist2)) / (p * p)
    if omega_e == 1.0:
        return 1.0 if omega_u == 1.0 else None
    return (omega_u - omega_e) / (1.0 - omega_e)


def brute_avg_f1(sets1, sets2):
    def f1(a, b):
        i = len(set(a) & set(b))
        if i == 0:
            return 0.0
        p, r = i / len(a), i / len(b)
        return 2 * p * r / (p + r)

    fwd = sum(max(f1(x, y) for y in sets2) for x in sets1)
    bwd = sum(max(f1(y, x) for x in sets1) for y in sets2)
    return fwd / (2 * len(sets1)) + bwd / (2 * len(sets2))


def random_cover_sets(rng, n, max_comms=5):
    sets = []
    for _ in range(rng.randint(1, max_comms)):
        size = rng.randint(1, n)
        sets.append(set(rng.sample(range(n), size)))
    return sets


# ---------------------------------------------------------------------------
# onmi
# ---------------------------------------------------------------------------

def test_onmi_identical_covers():
    sets = [{0, 1, 2}, {2, 3, 4}, {5, 6}]
    assert onmi(sets, sets, range(7)) == pytest.approx(1.0)


def test_onmi_universe_vs_singletons():
    # one cover is the whole universe, the other all singletons: the broad
    # community carries no marginal entropy while every singleton is fully
    # conditioned, leaving exactly half the similarity
    n = 8
    c1 = [set(range(n))]
    c2 = [{v} for v in range(n)]
    assert onmi(c1, c2, range(n)) == pytest.approx(0.5)
    assert onmi(c2, c1, range(n)) == pytest.approx(0.5)


def test_onmi_unrelated_covers_near_zero():
    c1 = [set(range(0, 5)), set(range(5, 10))]
    c2 = [set(range(0, 10, 2)), set(range(1, 10, 2))]
    assert onmi(c1, c2, range(10)) == pytest.approx(0.0, abs=0.05)


def test_onmi_empty_cover_rejected():
    with pytest.raises(ValueError):
        onmi([], [{0, 1}], range(3))
    with pytest.raises(ValueError):
        onmi([{0, 1}], [set()], range(3))


def test_onmi_symmetry_and_range():
    rng = random.Random(19)
    for trial in range(20):
        n = rng.randint(4, 16)
        c1 = random_cover_sets(rng, n)
        c2 = random_cover_sets(rng, n)
        a = onmi(c1, c2, range(n))
        b = onmi(c2, c1, range(n))
        assert a == pytest.approx(b, abs=1e-12)
        assert 0.0 <= a <= 1.0


# ---------------------------------------------------------------------------
# omega
# ---------------------------------------------------------------------------

def test_omega_identical_covers():
    sets = [{0, 1, 2}, {2, 3}]
    assert omega_index(sets, sets, range(5)) == pytest.approx(1.0)


def test_omega_crossed_pairs_fixture():
    c1 = [{1, 2}, {3, 4}]
    c2 = [{1, 3}, {2, 4}]
    assert omega_index(c1, c2, {1, 2, 3, 4}) == pytest.approx(-0.5)


def test_omega_matches_bruteforce_exactly():
    rng = random.Random(29)
    for trial in range(60):
        n = rng.randint(3, 18)
        c1 = random_cover_sets(rng, n)
        c2 = random_cover_sets(rng, n)
        expected = brute_omega(c1, c2, range(n))
        if expected is None:
            with pytest.raises(ValueError):
                omega_index(c1, c2, range(n))
        else:
            assert omega_index(c1, c2, range(n)) == expected


def test_omega_multiplicity_matters():
    # same co-membership structure but doubled multiplicity disagrees
    c1 = [{0, 1}, {0, 1}]
    c2 = [{0, 1}]
    uni = range(4)
    assert omega_index(c1, c1, uni) == pytest.approx(1.0)
    assert omega_index(c1, c2, uni) < 1.0


def test_omega_small_universe_rejected():
    with pytest.raises(ValueError):
        omega_index([{0}], [{0}], {0})


# ---------------------------------------------------------------------------
# average F1
# ---------------------------------------------------------------------------

def test_avg_f1_identical():
    sets = [{0, 1, 2}, {3, 4}]
    assert average_f1(sets, sets) == pytest.approx(1.0)


def test_avg_f1_printed_fixture():
    c1 = [{1, 2, 3}]
    c2 = [{1, 2}, {4, 5}]
    assert average_f1(c1, c2) == pytest.approx(0.6)


def test_avg_f1_duplicate_community():
    c1 = [{0, 1, 2}, {3, 4}]
    c2 = c1 + [{3, 4}]
    assert average_f1(c1, c2) == pytest.approx(brute_avg_f1(c1, c2), abs=1e-12)


def test_avg_f1_matches_bruteforce():
    rng = random.Random(31)
    for trial in range(40):
        n = rng.randint(3, 15)
        c1 = random_cover_sets(rng, n)
        c2 = random_cover_sets(rng, n)
        assert average_f1(c1, c2) == pytest.approx(brute_avg_f1(c1, c2), abs=1e-12)
        assert average_f1(c1, c2) == pytest.approx(average_f1(c2, c1), abs=1e-12)


# ---------------------------------------------------------------------------
# best-match subset
# ---------------------------------------------------------------------------

def test_best_match_identity():
    gt = [{0, 1, 2}, {3, 4}]
    assert sorted(map(sorted, best_match_subset(gt, gt))) == sorted(map(sorted, gt))


def test_best_match_dedup():
    gt = [{0, 1}, {2, 3}]
    detected = [{0, 1, 2, 3}]
    assert best_match_subset(gt, detected) == [{0, 1, 2, 3}]


def test_best_match_mixed_fixture():
    gt = [{0, 1, 2, 3}, {4, 5, 6}, {7, 8, 9}]
    detected = [{0, 1, 2}, {2, 3, 4, 5, 6}, {7, 8}, {8, 9}]
    # per-truth best F1: {0,1,2} (6/7), {2,3,4,5,6} (0.75), and a tie 0.8
    # between {7,8} and {8,9} resolved to the canonically earlier {7,8}
    got = best_match_subset(gt, detected)
    assert sorted(map(sorted, got)) == [[0, 1, 2], [2, 3, 4, 5, 6], [7, 8]]


def test_best_match_never_larger_than_truth():
    rng = random.Random(41)
    for trial in range(30):
        n = rng.randint(3, 15)
        gt = random_cover_sets(rng, n)
        det = random_cover_sets(rng, n)
        assert len(best_match_subset(gt, det)) <= len(gt)


# ---------------------------------------------------------------------------
# relabeling invariance and combined scoring
# ---------------------------------------------------------------------------

def test_metrics_relabeling_invariant():
    rng = random.Random(53)
    for trial in range(10):
        n = rng.randint(4, 12)
        c1 = random_cover_sets(rng, n)
        c2 = random_cover_sets(rng, n)
        perm = list(range(n))
        rng.shuffle(perm)
        m1 = [{perm[v] for v in s} for s in c1]
        m2 = [{perm[v] for v in s} for s in c2]
        assert onmi(c1, c2, range(n)) == pytest.approx(onmi(m1, m2, range(n)), abs=1e-12)
        assert omega_index(c1, c2, range(n)) == pytest.approx(omega_index(m1, m2, range(n)), abs=1e-12)
        assert average_f1(c1, c2) == pytest.approx(average_f1(m1, m2), abs=1e-12)


def test_score_identical_all_ones():
    sets = [{0, 1, 2}, {3, 4, 5}]
    for best_match in (False, True):
        rep = score(sets, sets, range(6), use_best_match=best_match)
        assert rep.onmi == pytest.approx(1.0)
        assert rep.omega == pytest.approx(1.0)
        assert rep.avg_f1 == pytest.approx(1.0)
        assert rep.metrics_average == pytest.approx(1.0)


def test_score_modes_differ_with_extra_communities():
    truth = [{0, 1, 2, 3}, {4, 5, 6, 7}]
    detected = [{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 4}, {1, 5}, {2, 6}]
    plain = score(detected, truth, range(8), use_best_match=False)
    matched = score(detected, truth, range(8), use_best_match=True)
    assert matched.avg_f1 > plain.avg_f1
    assert matched.metrics_average != plain.metrics_average


def test_score_average_is_mean():
    rng = random.Random(61)
    for trial in range(10):
        n = rng.randint(4, 12)
        c1 = random_cover_sets(rng, n)
        c2 = random_cover_sets(rng, n)
        rep = score(c1, c2, range(n))
        assert rep.metrics_average == pytest.approx((rep.onmi + rep.omega + rep.avg_f1) / 3, abs=1e-12)


def test_score_report_get():
    rep = ScoreReport(onmi=0.1, omega=0.2, avg_f1=0.3, metrics_average=0.2)
    assert rep.get(MetricKind.ONMI) == 0.1
    assert rep.get(MetricKind.OMEGA) == 0.2
    assert rep.get(MetricKind.AVG_F1) == 0.3
    assert rep.get(MetricKind.METRICS_AVERAGE) == 0.2


def test_metric_kind_tags():
    assert {k.value for k in MetricKind} == {"onmi", "omega", "avgf1", "average"}
