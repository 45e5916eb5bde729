"""Pseudo-eigenvector features from truncated power iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DegenerateInputError, DimensionError, ParameterError, as_matrix, as_square


@dataclass(frozen=True)
class PiSchedule:
    """How many power-iteration vectors to draw and how long to run each.

    Vector ``r`` (0-based) runs ``max(1, base_iters - r * decay)`` steps.
    """

    p: int = 6
    base_iters: int = 50
    decay: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ParameterError("p must be >= 1")
        if self.base_iters < 1:
            raise ParameterError("base_iters must be >= 1")
        if self.decay < 0:
            raise ParameterError("decay must be >= 0")

    def iterations(self, r: int) -> int:
        return max(1, self.base_iters - r * self.decay)

    @classmethod
    def for_clusters(cls, k: int, **kw) -> "PiSchedule":
        return cls(p=max(4, 2 * k), **kw)


def power_iterate(W, v0, iters: int) -> np.ndarray:
    """Run ``iters`` steps of ``v <- W v / |W v|_1`` starting from ``v0``.

    With ``iters == 0`` this just l1-normalizes ``v0``.
    """
    W = as_square(W, "W")
    v = np.asarray(v0, dtype=float).ravel()
    if v.size != W.shape[0]:
        raise DimensionError(f"v0 has length {v.size}, expected {W.shape[0]}")
    norm = np.abs(v).sum()
    if not norm > 0:
        raise ParameterError("v0 must be nonzero")
    v = v / norm
    for t in range(iters):
        u = W @ v
        norm = np.abs(u).sum()
        if not norm > 0:
            raise DegenerateInputError(f"power iteration collapsed to zero at step {t + 1}")
        v = u / norm
    return v


def generate_pseudo_eigenvectors(W, sched: PiSchedule) -> np.ndarray:
    """Stack ``sched.p`` truncated power-iteration vectors into a ``p x n`` matrix."""
    W = as_square(W, "W")
    n = W.shape[0]
    rng = np.random.default_rng(sched.seed)
    starts = rng.random((sched.p, n))
    starts -= starts.mean(axis=1, keepdims=True)
    return np.vstack([power_iterate(W, starts[r], sched.iterations(r)) for r in range(sched.p)])


def whiten(X, tol: float = 1e-12) -> np.ndarray:
    """Decorrelate the rows of ``X`` so that ``Xw Xw^T / n = I``.

    Rows are mean-centred and orthogonalized in order (Gram-Schmidt, i.e.
    Cholesky whitening). A row is dropped when its centred energy is at most
    ``tol`` times its raw energy (constant up to rounding) or when what is
    left after orthogonalization is at most ``tol`` times the largest row
    variance, so the output can have fewer rows than the input. Any two whitening transforms differ by a rotation,
    which leaves ``Xw^T Xw`` unchanged.
    """
    X = as_matrix(X, "X")
    n = X.shape[1]
    C = X - X.mean(axis=1, keepdims=True)
    var = (C ** 2).sum(axis=1)
    # rows that are constant up to rounding relative to their own size carry no signal
    live = var > tol * (X ** 2).sum(axis=1)
    scale = var[live].max(initial=0.0)
    if not scale > 0:
        raise DegenerateInputError("all rows are constant; nothing to whiten")
    basis: list[np.ndarray] = []
    for row in C[live]:
        v = row.copy()
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            for b in basis:
                v -= (b @ v) * b
        nv = v @ v
        if nv > tol * scale:
            basis.append(v / np.sqrt(nv))
    return np.sqrt(n) * np.vstack(basis)


def normalize_columns(X) -> np.ndarray:
    """Scale every column of ``X`` to unit Euclidean norm."""
    X = as_matrix(X, "X")
    norms = np.linalg.norm(X, axis=0)
    bad = np.flatnonzero(~(norms > 0))
    if bad.size:
        raise DegenerateInputError(f"column {bad[0]} is zero and cannot be normalized")
    return X / norms


def feature_matrix(W, sched: PiSchedule) -> np.ndarray:
    """Pseudo-eigenvectors, whitened, with unit-norm columns."""
    return normalize_columns(whiten(generate_pseudo_eigenvectors(W, sched)))
