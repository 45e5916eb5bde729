import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from castclust.core import ParameterError
from castclust.tknn import MutualKnnGraph, knn_indices, mutual_knn, reachability_matrix
from castclust.similarity import pairwise_distances


def brute_mutual_knn(points, K):
    """Pairwise check straight from the definition (sort by distance, then index)."""
    P = np.asarray(points, dtype=float).reshape(len(points), -1)
    n = len(P)
    def nearest(i):
        others = sorted((np.linalg.norm(P[i] - P[j]), j) for j in range(n) if j != i)
        return {j for _, j in others[:K]}
    nn = [nearest(i) for i in range(n)]
    return {(i, j) for i in range(n) for j in range(i + 1, n) if j in nn[i] and i in nn[j]}


def closure_oracle(n, edges):
    """Boolean transitive closure by repeated squaring of (A + I)."""
    R = np.eye(n, dtype=bool)
    for i, j in edges:
        R[i, j] = R[j, i] = True
    while True:
        nxt = (R.astype(int) @ R.astype(int)) > 0
        if np.array_equal(nxt, R):
            return R.astype(float)
        R = nxt


def test_mutual_knn_example():
    assert mutual_knn([0.0, 1.0, 10.0], K=1).edges == {(0, 1)}
    assert brute_mutual_knn([0.0, 1.0, 10.0], 1) == {(0, 1)}


def test_mutual_knn_complete(rng):
    pts = rng.normal(size=(7, 2))
    g = mutual_knn(pts, K=6)
    assert len(g.edges) == 21


def test_mutual_knn_pair():
    assert mutual_knn([[0, 0], [1, 1]], K=1).edges == {(0, 1)}


def test_mutual_knn_range():
    with pytest.raises(ParameterError):
        mutual_knn([0.0, 1.0, 2.0], K=3)
    with pytest.raises(ParameterError):
        mutual_knn([0.0, 1.0, 2.0], K=0)


def test_tie_break_lower_index():
    # 1 is equidistant from 0 and 2; the lower index wins
    assert knn_indices(pairwise_distances([0.0, 1.0, 2.0]), 1)[1, 0] == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(1, 5), st.integers(0, 10_000))
def test_mutual_knn_matches_brute_force(n, K, seed):
    K = min(K, n - 1)
    pts = np.random.default_rng(seed).integers(0, 6, size=(n, 2)).astype(float)  # many ties
    assert mutual_knn(pts, K).edges == brute_mutual_knn(pts, K)


def test_reachability_examples():
    W = reachability_matrix(MutualKnnGraph(4, frozenset({(0, 1), (1, 2)})))
    expected = np.zeros((4, 4))
    expected[:3, :3] = 1
    expected[3, 3] = 1
    np.testing.assert_array_equal(W, expected)
    np.testing.assert_array_equal(reachability_matrix(MutualKnnGraph(3, frozenset())), np.eye(3))
    full = frozenset((i, j) for i in range(4) for j in range(i + 1, 4))
    np.testing.assert_array_equal(reachability_matrix(MutualKnnGraph(4, full)), np.ones((4, 4)))


def test_reachability_columns_equal_within_component(rng):
    g = mutual_knn(rng.normal(size=(30, 2)), K=3)
    W = reachability_matrix(g)
    for i, j in g.edges:
        np.testing.assert_array_equal(W[:, i], W[:, j])
    assert np.all(np.diag(W) == 1)
    np.testing.assert_array_equal(W, W.T)
