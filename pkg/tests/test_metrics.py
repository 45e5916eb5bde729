import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from castclust.core import ParameterError
from castclust.metrics import (
    ami,
    contingency_table,
    expected_mutual_information,
    mutual_information,
    purity,
    rand_index,
)


def brute_rand(a, b):
    agree = sum((a[i] == a[j]) == (b[i] == b[j]) for i, j in itertools.combinations(range(len(a)), 2))
    return agree / math.comb(len(a), 2)


def brute_purity(truth, pred):
    total = 0
    for c in set(pred):
        members = [t for t, p in zip(truth, pred) if p == c]
        total += max(members.count(t) for t in set(members))
    return total / len(truth)


def _compositions(total, caps):
    """Integer vectors with the given sum, each entry bounded by its cap."""
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for v in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - v, caps[1:]):
            yield (v,) + rest


def enumerated_emi(a, b):
    """E[MI] by enumerating every table with row sums a and column sums b.

    P(table) = prod(a_i!) prod(b_j!) / (n! prod(n_ij!)).
    """
    n = sum(a)
    emi = 0.0
    total_p = 0.0

    def rows(i, colleft):
        if i == len(a) - 1:
            if sum(colleft) == a[-1]:
                yield [tuple(colleft)]
            return
        for r in _compositions(a[i], colleft):
            for tail in rows(i + 1, [c - v for c, v in zip(colleft, r)]):
                yield [r] + tail

    const = sum(math.lgamma(x + 1) for x in a) + sum(math.lgamma(x + 1) for x in b) - math.lgamma(n + 1)
    for table in rows(0, list(b)):
        t = np.array(table)
        logp = const - sum(math.lgamma(x + 1) for x in t.ravel())
        p = math.exp(logp)
        total_p += p
        mi = 0.0
        for i in range(len(a)):
            for j in range(len(b)):
                if t[i, j]:
                    mi += t[i, j] / n * math.log(n * t[i, j] / (a[i] * b[j]))
        emi += p * mi
    assert abs(total_p - 1) < 1e-12
    return emi


def reference_ami(truth, pred):
    table = contingency_table(truth, pred)
    n = table.sum()
    a, b = table.sum(axis=1), table.sum(axis=0)
    h = lambda c: -sum(x / n * math.log(x / n) for x in c if x)
    mi = mutual_information(table)
    emi = enumerated_emi(a.tolist(), b.tolist())
    denom = max(h(a), h(b)) - emi
    return 1.0 if abs(denom) < 1e-15 else (mi - emi) / denom


def test_purity_examples():
    assert purity([0, 1, 2], [0, 1, 2]) == 1.0
    assert purity([0, 0, 1, 1], [0, 1, 0, 1]) == 0.5
    assert purity([0, 0, 1, 1], [0, 0, 0, 0]) == 0.5


def test_rand_examples():
    assert rand_index([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(1 / 3, abs=1e-15)
    assert rand_index([0, 0, 1, 1, 2], [5, 5, 3, 3, 9]) == 1.0


def test_ami_examples():
    assert ami([0, 0, 1, 1], [0, 0, 1, 1]) == pytest.approx(1.0, abs=1e-12)
    assert ami([0, 0, 1, 1, 2, 2], [2, 2, 0, 0, 1, 1]) == pytest.approx(1.0, abs=1e-12)
    assert ami([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(reference_ami([0, 0, 1, 1], [0, 1, 0, 1]), abs=1e-10)


def test_ami_small_table_frozen():
    # truth=[0,0,1,1], pred=[0,1,0,1]: the diagonal count n11 is 0, 1 or 2 with
    # probabilities 1/6, 2/3, 1/6 and MI log 2, 0, log 2, so E[MI] = (1/3) log 2;
    # observed MI = 0 and H = log 2.
    emi = math.log(2) / 3
    expected = (0 - emi) / (math.log(2) - emi)
    assert expected == pytest.approx(-0.5)
    assert ami([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(expected, abs=1e-10)


def test_ami_degenerate_single_clusters():
    assert ami([0, 0, 0], [1, 1, 1]) == 1.0


def test_length_mismatch():
    for f in (purity, ami, rand_index):
        with pytest.raises(ParameterError):
            f([0, 1], [0, 1, 1])
    with pytest.raises(ParameterError):
        rand_index([0], [0])


labelings = st.integers(2, 12).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 3), min_size=n, max_size=n),
                        st.lists(st.integers(0, 3), min_size=n, max_size=n)))


@settings(max_examples=60, deadline=None)
@given(labelings)
def test_ami_matches_enumeration(pair):
    truth, pred = pair
    assert ami(truth, pred) == pytest.approx(reference_ami(truth, pred), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 60).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 5), min_size=n, max_size=n),
                        st.lists(st.integers(0, 5), min_size=n, max_size=n))))
def test_fast_paths_match_brute_force(pair):
    a, b = pair
    assert rand_index(a, b) == brute_rand(a, b)
    assert purity(a, b) == brute_purity(a, b)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=40), st.permutations(range(5)), st.data())
def test_permutation_invariance_and_symmetry(truth, perm, data):
    pred = data.draw(st.lists(st.integers(0, 4), min_size=len(truth), max_size=len(truth)))
    pp = [perm[v] for v in pred]
    pt = [perm[v] for v in truth]
    assert purity(truth, pp) == purity(truth, pred)
    assert purity(pt, pred) == purity(truth, pred)
    assert rand_index(truth, pp) == rand_index(truth, pred)
    assert ami(truth, pp) == pytest.approx(ami(truth, pred), abs=1e-12)
    assert rand_index(truth, pred) == pytest.approx(rand_index(pred, truth), abs=1e-12)
    assert ami(truth, pred) == pytest.approx(ami(pred, truth), abs=1e-12)


def test_purity_is_not_symmetric():
    a, b = [0, 0, 0, 0], [0, 0, 1, 1]
    assert purity(a, b) == 1.0 and purity(b, a) == 0.5


def test_ami_against_sklearn(rng):
    sk = pytest.importorskip("sklearn.metrics")
    for _ in range(20):
        a = rng.integers(0, 4, 80)
        b = rng.integers(0, 5, 80)
        assert ami(a, b) == pytest.approx(sk.adjusted_mutual_info_score(a, b, average_method="max"), abs=1e-10)


def test_ami_near_zero_for_independent_partitions(rng):
    vals = [ami(rng.integers(0, 3, 200), rng.integers(0, 3, 200)) for _ in range(30)]
    assert abs(np.mean(vals)) < 0.01
