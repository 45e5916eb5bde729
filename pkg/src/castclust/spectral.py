"""Spectral back-ends, consensus k-means and the end-to-end pipelines."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .core import (
    CastError,
    Clustering,
    DimensionError,
    NumericError,
    ParameterError,
    SolverConfig,
    as_matrix,
    as_square,
    relabel_canonical,
    symmetrize_abs,
)
from .pseudoeig import PiSchedule, feature_matrix
from .similarity import laplacian, pairwise_distances, row_normalize
from .solvers import SolveReport, build_cast_matrix, rosc_closed_form, solve_sparse_alm
from .tknn import DEFAULT_K, mutual_knn, reachability_matrix

log = logging.getLogger(__name__)

SOLVERS = ("rosc", "rosc_s", "cast")
KMEANS_MAX_ITERS = 300


class StageError(CastError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class MethodParams:
    k: int
    K: int = DEFAULT_K
    solver: str = "cast"
    solver_cfg: SolverConfig = field(default_factory=SolverConfig)
    pi: Optional[PiSchedule] = None  # None: PiSchedule.for_clusters(k, seed=seed)
    kmeans_runs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ParameterError(f"k must be >= 2, got {self.k}")
        if self.kmeans_runs < 1:
            raise ParameterError("kmeans_runs must be >= 1")
        if self.solver not in SOLVERS:
            raise ParameterError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")

    @property
    def schedule(self) -> PiSchedule:
        return self.pi if self.pi is not None else PiSchedule.for_clusters(self.k, seed=self.seed)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    """Make the first clearly nonzero entry of every row positive."""
    V = V.copy()
    for r in range(V.shape[0]):
        row = V[r]
        big = np.flatnonzero(np.abs(row) > 1e-12 * np.abs(row).max(initial=0.0))
        if big.size and row[big[0]] < 0:
            V[r] = -row
    return V


def spectral_embed(S, k: int, kind: str = "ncuts", *, return_eigenvalues: bool = False):
    """Rows are the ``k`` smallest eigenvectors of the normalized Laplacian of ``S``.

    ``ncuts`` returns random-walk eigenvectors (``D^-1/2`` times the symmetric
    ones, rescaled to unit length); ``njw`` returns the symmetric ones with
    every object's k-vector (column) scaled to unit length.
    """
    S = as_square(S, "S")
    n = S.shape[0]
    if not 1 <= k < n:
        raise ParameterError(f"k must lie in [1, {n - 1}], got {k}")
    if kind not in ("ncuts", "njw"):
        raise ParameterError(f"unknown spectral kind {kind!r}")
    L = laplacian(S, "symmetric")
    try:
        vals, U = scipy.linalg.eigh(L, subset_by_index=[0, k - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    V = U.T
    if kind == "ncuts":
        V = V / np.sqrt(S.sum(axis=1))[None, :]
        V = V / np.linalg.norm(V, axis=1, keepdims=True)
    else:
        norms = np.linalg.norm(V, axis=0, keepdims=True)
        V = V / np.where(norms > 0, norms, 1.0)
    V = _fix_signs(V)
    return (V, vals) if return_eigenvalues else V


def _lloyd(P: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = P.shape[0]
    C = P[rng.choice(n, size=k, replace=False)].copy()
    sq = (P ** 2).sum(axis=1)
    labels = None
    for _ in range(KMEANS_MAX_ITERS):
        dist = sq[:, None] - 2.0 * P @ C.T + (C ** 2).sum(axis=1)[None, :]
        new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = labels == c
            if members.any():
                C[c] = P[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its centroid
                far = int(np.argmax(dist[np.arange(n), labels]))
                C[c] = P[far]
                labels[far] = c
    return labels


def kmeans_consensus(features, k: int, runs: int = 100, seed: int = 0) -> np.ndarray:
    """Most frequent labeling over ``runs`` seeded Lloyd k-means runs.

    ``features`` is ``d x n`` (one column per object). Labelings are compared
    after :func:`relabel_canonical`; ties go to the lexicographically smallest.
    """
    F = as_matrix(features, "features")
    P = F.T
    n = P.shape[0]
    if k > n:
        raise ParameterError(f"k={k} exceeds the number of objects {n}")
    if runs < 1:
        raise ParameterError("runs must be >= 1")
    votes: Counter = Counter()
    for r in range(runs):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        votes[tuple(relabel_canonical(_lloyd(P, k, rng)).tolist())] += 1
    best = max(votes.values())
    return np.array(min(lab for lab, c in votes.items() if c == best), dtype=np.int64)


def baseline_cluster(S, k: int, kind: str = "ncuts", seed: int = 0, runs: int = 100) -> Clustering:
    """Plain NCuts / NJW spectral clustering of a similarity matrix."""
    V = spectral_embed(S, k, kind)
    labels = kmeans_consensus(V, k, runs, seed)
    return Clustering(labels=labels, k=k, method=kind, seed=seed)


# ---------------------------------------------------------------- pipelines

def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except (CastError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def build_features(S, points, K: int, sched: PiSchedule, *, distances=None):
    """Feature matrix ``X`` (pseudo-eigenvectors) and TKNN reachability ``W``."""
    if distances is None:
        distances = _stage("distances", pairwise_distances, points)
    S = as_square(S, "S")
    if S.shape[0] != distances.shape[0]:
        raise StageError("inputs", DimensionError(
            f"similarity matrix has {S.shape[0]} objects but the point set has {distances.shape[0]}"))
    g = _stage("tknn", mutual_knn, K=K, distances=distances)
    W = _stage("tknn", reachability_matrix, g)
    Wrn = _stage("normalize", row_normalize, S)
    X = _stage("pseudo-eigenvectors", feature_matrix, Wrn, sched)
    return X, W


def coefficient_matrix(X, W, solver: str, cfg: SolverConfig):
    """Run one of the three solvers; returns ``(Z, report)``."""
    if solver == "rosc":
        Z = _stage("solver", rosc_closed_form, X, W, cfg.alpha1, cfg.alpha2)
        return Z, SolveReport(converged=True, iterations=0, residual=0.0, objective=float("nan"))
    if solver == "rosc_s":
        return _stage("solver", solve_sparse_alm, X, W, cfg)
    if solver == "cast":
        return _stage("solver", build_cast_matrix, X, W, cfg, return_report=True)
    raise ParameterError(f"unknown solver {solver!r}")


def correlation_matrix(S, points, params: MethodParams, *, distances=None):
    """``(|Z| + |Z^T|) / 2`` for the chosen solver, plus the solver report."""
    X, W = build_features(S, points, params.K, params.schedule, distances=distances)
    Z, report = coefficient_matrix(X, W, params.solver, params.solver_cfg)
    return symmetrize_abs(Z), report


def ncuts_on(A, k: int, runs: int, seed: int) -> np.ndarray:
    V = _stage("spectral", spectral_embed, A, k, "ncuts")
    return _stage("kmeans", kmeans_consensus, V, k, runs, seed)


def cluster(S, points, params: MethodParams, *, distances=None) -> Clustering:
    """TKNN graph, pseudo-eigenvectors, coefficient matrix, then NCuts on its correlation matrix."""
    A, report = correlation_matrix(S, points, params, distances=distances)
    labels = ncuts_on(A, params.k, params.kmeans_runs, params.seed)
    return Clustering(labels=labels, k=params.k, method=params.solver, seed=params.seed,
                      meta={"report": report})
