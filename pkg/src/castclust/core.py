"""Shared types, errors and small matrix helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class CastError(Exception):
    """Base class for all package errors."""


class ParameterError(CastError, ValueError):
    """An argument is outside its valid range."""


class DimensionError(CastError, ValueError):
    """Array shapes do not agree."""


class DegenerateInputError(CastError, ValueError):
    """The input is valid in shape but numerically unusable (zero rows, ...)."""


class NumericError(CastError, ArithmeticError):
    """A factorization or decomposition failed."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the ALM solvers (and the ROSC closed form).

    ``alpha1`` weights the sparsity / trace-Lasso / Frobenius term and
    ``alpha2`` the pull towards the TKNN reachability matrix.

    ``mu0=None`` (the default) starts the penalty at ``min(0.1, alpha1)``.
    A penalty far above ``alpha1`` lets the ALM reach feasibility long
    before the shrinkage has done its work, so small-``alpha1`` solutions
    would otherwise stop well short of the minimum.
    """

    alpha1: float = 0.1
    alpha2: float = 0.1
    rho: float = 1.1
    mu0: float | None = None
    mu_max: float = 1e10
    epsilon: float = 1e-6
    max_iters: int = 1000

    def __post_init__(self):
        if not self.alpha1 > 0:
            raise ParameterError(f"alpha1 must be > 0, got {self.alpha1}")
        if not self.alpha2 >= 0:
            raise ParameterError(f"alpha2 must be >= 0, got {self.alpha2}")
        if not self.rho > 1:
            raise ParameterError(f"rho must be > 1, got {self.rho}")
        if self.mu0 is None and self.alpha1 > 0:
            object.__setattr__(self, "mu0", min(0.1, float(self.alpha1)))
        if not self.mu0 > 0:
            raise ParameterError(f"mu0 must be > 0, got {self.mu0}")
        if not self.mu0 <= self.mu_max:
            raise ParameterError("mu0 must not exceed mu_max")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")


@dataclass(frozen=True)
class Clustering:
    labels: np.ndarray
    k: int
    method: str
    seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise DimensionError("labels must be one-dimensional")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ParameterError(f"labels must lie in [0, {self.k})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ParameterError(f"{name} contains non-finite entries")
    return m


def as_square(a, name: str = "matrix") -> np.ndarray:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def diag_matrix(v) -> np.ndarray:
    """Diag(vector): the diagonal matrix with ``v`` on its main diagonal."""
    return np.diag(np.asarray(v, dtype=float).ravel())


def diag_part(M) -> np.ndarray:
    """Diag(matrix): keep the main diagonal of ``M``, zero elsewhere."""
    M = np.asarray(M, dtype=float)
    return np.diag(np.diag(M))


def diag_vector(M) -> np.ndarray:
    """diag(matrix): the main diagonal of ``M`` as a vector."""
    return np.diag(np.asarray(M, dtype=float)).copy()


def symmetrize_abs(Z) -> np.ndarray:
    """Correlation matrix ``(|Z| + |Z^T|) / 2`` built from a coefficient matrix."""
    Z = as_square(Z, "Z")
    A = np.abs(Z)
    return (A + A.T) / 2.0


def relabel_canonical(labels: Sequence[int]) -> np.ndarray:
    """Rename cluster ids in order of first appearance.

    >>> relabel_canonical([2, 2, 0, 1]).tolist()
    [0, 0, 1, 2]
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ParameterError("labels must be nonempty")
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    # rank of each distinct value by its first position
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.ravel()].astype(np.int64)
