"""Pairwise similarity matrices and graph normalizations."""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .core import DegenerateInputError, ParameterError, as_matrix, as_square

DEFAULT_LOCAL_SCALE = 7


def as_points(points) -> np.ndarray:
    """Validate an ``(n, d)`` point set; 1-D input is treated as n points in 1-D."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    P = as_matrix(P, "points")
    if P.shape[0] < 1:
        raise ParameterError("a point set needs at least one point")
    return P


def pairwise_distances(points) -> np.ndarray:
    """Euclidean distance matrix of a point set."""
    P = as_points(points)
    if P.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(P))


def gaussian_similarity(points, sigma: float) -> np.ndarray:
    """Gaussian kernel affinities ``exp(-|xi - xj|^2 / (2 sigma^2))`` with zero diagonal."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    D = pairwise_distances(points)
    S = np.exp(-(D ** 2) / (2.0 * sigma ** 2))
    np.fill_diagonal(S, 0.0)
    return S


def local_scales(distances: np.ndarray, l: int) -> np.ndarray:
    """Distance from each object to its ``l``-th nearest other object.

    A zero scale (``l`` or more duplicates of a point) is replaced by the
    smallest positive pairwise distance in the whole set.
    """
    D = as_square(distances, "distances")
    n = D.shape[0]
    if not 1 <= l <= n - 1:
        raise ParameterError(f"l must lie in [1, {n - 1}], got {l}")
    off = D + np.diag(np.full(n, np.inf))
    sigma = np.partition(off, l - 1, axis=1)[:, l - 1]
    if np.any(sigma <= 0):
        positive = D[D > 0]
        if positive.size == 0:
            raise DegenerateInputError("all points coincide; local scales are undefined")
        sigma = np.where(sigma > 0, sigma, positive.min())
    return sigma


def locally_scaled_similarity(points=None, l: int = DEFAULT_LOCAL_SCALE, *, distances=None) -> np.ndarray:
    """Self-tuning affinities ``exp(-|xi - xj|^2 / (sigma_i sigma_j))``.

    Either ``points`` or a precomputed ``distances`` matrix must be given.
    """
    if distances is None:
        if points is None:
            raise ParameterError("points or distances required")
        distances = pairwise_distances(points)
    D = as_square(distances, "distances")
    sigma = local_scales(D, l)
    S = np.exp(-(D ** 2) / np.outer(sigma, sigma))
    np.fill_diagonal(S, 0.0)
    return (S + S.T) / 2.0


def _degrees(S: np.ndarray) -> np.ndarray:
    d = S.sum(axis=1)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise DegenerateInputError(f"row {bad[0]} of the similarity matrix has no positive weight")
    return d


def row_normalize(S) -> np.ndarray:
    """Random-walk transition matrix ``D^-1 S``."""
    S = as_square(S, "S")
    return S / _degrees(S)[:, None]


def laplacian(S, kind: str = "random_walk") -> np.ndarray:
    """Normalized graph Laplacian of ``S``.

    ``random_walk`` gives ``D^-1 (D - S)``, ``symmetric`` gives
    ``D^-1/2 (D - S) D^-1/2``.
    """
    S = as_square(S, "S")
    d = _degrees(S)
    L = np.diag(d) - S
    if kind == "random_walk":
        return L / d[:, None]
    if kind == "symmetric":
        r = 1.0 / np.sqrt(d)
        L = r[:, None] * L * r[None, :]
        return (L + L.T) / 2.0
    raise ParameterError(f"unknown laplacian kind {kind!r}")
