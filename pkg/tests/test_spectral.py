import numpy as np
import pytest

from castclust.core import ParameterError, SolverConfig
from castclust.metrics import purity
from castclust.similarity import locally_scaled_similarity, pairwise_distances
from castclust.tknn import mutual_knn, reachability_matrix
from castclust.spectral import (
    MethodParams,
    StageError,
    baseline_cluster,
    cluster,
    kmeans_consensus,
    spectral_embed,
)


def two_blobs(rng, n1=25, n2=30):
    pts = np.vstack([rng.normal(0.0, 0.3, size=(n1, 2)), rng.normal(6.0, 0.3, size=(n2, 2))])
    truth = np.repeat([0, 1], [n1, n2])
    return pts, truth


def block_similarity(sizes, eps=0.0):
    n = sum(sizes)
    S = np.full((n, n), eps)
    start = 0
    for s in sizes:
        S[start:start + s, start:start + s] = 1.0
        start += s
    return S


@pytest.mark.parametrize("kind", ["ncuts", "njw"])
def test_embed_disconnected_blocks(kind):
    S = block_similarity([4, 6])
    V, vals = spectral_embed(S, 2, kind, return_eigenvalues=True)
    np.testing.assert_allclose(vals, 0.0, atol=1e-12)
    # the embedding is constant on each block and differs between blocks
    for row in V:
        assert np.ptp(row[:4]) < 1e-10 and np.ptp(row[4:]) < 1e-10
    assert not np.allclose(V[:, 0], V[:, 5])


def test_embed_normalizations(rng):
    S = block_similarity([5, 5], eps=0.05) + 0.01 * rng.random((10, 10))
    S = (S + S.T) / 2
    np.testing.assert_allclose(np.linalg.norm(spectral_embed(S, 3, "ncuts"), axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(spectral_embed(S, 3, "njw"), axis=0), 1.0)


def test_embed_sign_convention(rng):
    S = block_similarity([5, 5], eps=0.1)
    V = spectral_embed(S, 2)
    for row in V:
        first = row[np.flatnonzero(np.abs(row) > 1e-9)[0]]
        assert first > 0


def test_embed_rejects_bad_k():
    with pytest.raises(ParameterError):
        spectral_embed(np.ones((3, 3)), 3)
    with pytest.raises(ParameterError):
        spectral_embed(np.ones((3, 3)), 1, "spectral")


def test_kmeans_consensus_separated(rng):
    pts = np.vstack([rng.normal(c, 0.1, size=(10, 2)) for c in (5.0, 0.0, -5.0)])
    labels = kmeans_consensus(pts.T, 3, runs=20, seed=3)
    np.testing.assert_array_equal(labels, np.repeat([0, 1, 2], 10))


def test_kmeans_consensus_deterministic(rng):
    pts = rng.normal(size=(40, 2))
    a = kmeans_consensus(pts.T, 4, runs=15, seed=1)
    np.testing.assert_array_equal(a, kmeans_consensus(pts.T, 4, runs=15, seed=1))
    assert a[0] == 0  # canonical labels


def test_kmeans_handles_duplicate_points():
    pts = np.array([[0.0, 0.0]] * 5 + [[1.0, 1.0]])
    labels = kmeans_consensus(pts.T, 3, runs=5)
    assert len(np.unique(labels)) == 3


def test_kmeans_rejects():
    with pytest.raises(ParameterError):
        kmeans_consensus(np.zeros((2, 3)), 4)
    with pytest.raises(ParameterError):
        kmeans_consensus(np.zeros((2, 3)), 2, runs=0)


@pytest.mark.parametrize("kind", ["ncuts", "njw"])
def test_baseline_two_blobs(rng, kind):
    pts, truth = two_blobs(rng)
    res = baseline_cluster(locally_scaled_similarity(pts), 2, kind, seed=0, runs=10)
    assert purity(truth, res.labels) == 1.0
    assert res.method == kind


@pytest.mark.parametrize("solver", ["rosc", "rosc_s", "cast"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_pipeline_recovers_blobs_when_reachability_matches(solver, seed):
    # Easy instance: the TKNN components are exactly the two blobs and the
    # reachability term dominates, so the correlation matrix is block-diagonal.
    rng = np.random.default_rng(seed)
    pts = np.vstack([rng.uniform(0, 1, (30, 2)), rng.uniform(0, 1, (30, 2)) + [5.0, 0.0]])
    truth = np.repeat([0, 1], 30)
    D = pairwise_distances(pts)
    S = locally_scaled_similarity(distances=D)
    W = reachability_matrix(mutual_knn(K=12, distances=D))
    np.testing.assert_array_equal(W, (truth[:, None] == truth[None, :]).astype(float))
    params = MethodParams(k=2, K=12, solver=solver, kmeans_runs=10,
                          solver_cfg=SolverConfig(alpha1=0.1, alpha2=10.0))
    res = cluster(S, pts, params, distances=D)
    assert purity(truth, res.labels) == 1.0
    assert res.meta["report"].converged
    np.testing.assert_array_equal(res.labels, cluster(S, pts, params, distances=D).labels)


def test_pipeline_stage_errors(rng):
    pts, _ = two_blobs(rng)
    S = locally_scaled_similarity(pts)
    with pytest.raises(StageError) as info:
        cluster(S[:-1, :-1], pts, MethodParams(k=2))
    assert info.value.stage == "inputs"
    with pytest.raises(StageError) as info:
        cluster(S, pts, MethodParams(k=2, K=len(pts)))
    assert info.value.stage == "tknn"
    assert isinstance(info.value.cause, ParameterError)


def test_method_params_validation():
    with pytest.raises(ParameterError):
        MethodParams(k=1)
    with pytest.raises(ParameterError):
        MethodParams(k=2, solver="lasso")
    with pytest.raises(ParameterError):
        MethodParams(k=2, kmeans_runs=0)
    p = MethodParams(k=3, seed=5, solver_cfg=SolverConfig(alpha1=1.0))
    assert p.schedule.p == 6 and p.schedule.seed == 5
