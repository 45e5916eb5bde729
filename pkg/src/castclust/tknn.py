"""Transitive K-nearest-neighbour graphs and their reachability matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import ParameterError, as_square
from .similarity import pairwise_distances

DEFAULT_K = 4


@dataclass(frozen=True)
class MutualKnnGraph:
    n: int
    edges: frozenset  # of (i, j) with i < j

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            A[i, j] = A[j, i] = True
        return A


def knn_indices(distances, K: int) -> np.ndarray:
    """Indices of the ``K`` nearest other objects of each object.

    Ties are broken by the lower index (a stable sort of each row).
    """
    D = as_square(distances, "distances")
    n = D.shape[0]
    if not 1 <= K <= n - 1:
        raise ParameterError(f"K must lie in [1, {n - 1}], got {K}")
    off = D.copy()
    np.fill_diagonal(off, np.inf)
    return np.argsort(off, axis=1, kind="stable")[:, :K]


def mutual_knn(points=None, K: int = DEFAULT_K, *, distances=None) -> MutualKnnGraph:
    """Graph linking i and j iff each is among the other's K nearest neighbours."""
    if distances is None:
        if points is None:
            raise ParameterError("points or distances required")
        distances = pairwise_distances(points)
    nbrs = knn_indices(distances, K)
    n = nbrs.shape[0]
    member = np.zeros((n, n), dtype=bool)
    member[np.repeat(np.arange(n), K), nbrs.ravel()] = True
    mutual = np.triu(member & member.T, k=1)
    edges = frozenset(zip(*(idx.tolist() for idx in np.nonzero(mutual))))
    return MutualKnnGraph(n=n, edges=edges)


def reachability_matrix(g: MutualKnnGraph) -> np.ndarray:
    """Binary matrix with ones exactly between objects of one connected component.

    The diagonal is one: every object reaches itself.
    """
    if g.edges:
        rows, cols = np.array(sorted(g.edges)).T
    else:
        rows = cols = np.zeros(0, dtype=int)
    A = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(g.n, g.n))
    _, comp = connected_components(A, directed=False)
    return (comp[:, None] == comp[None, :]).astype(float)
