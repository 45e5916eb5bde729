"""External clustering-quality measures: purity, AMI and the Rand index.

All three work on the contingency table of the two labelings, so they are
invariant to renaming the cluster ids of either argument.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .core import ParameterError


def _pair(truth, pred):
    truth = np.asarray(truth).ravel()
    pred = np.asarray(pred).ravel()
    if truth.size != pred.size:
        raise ParameterError(f"label sequences differ in length ({truth.size} vs {pred.size})")
    return truth, pred


def contingency_table(truth, pred) -> np.ndarray:
    """Counts ``n_ij`` of objects in true cluster ``i`` and predicted cluster ``j``."""
    truth, pred = _pair(truth, pred)
    _, ti = np.unique(truth, return_inverse=True)
    _, pj = np.unique(pred, return_inverse=True)
    table = np.zeros((ti.max(initial=-1) + 1, pj.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ti.ravel(), pj.ravel()), 1)
    return table


def purity(truth, pred) -> float:
    """Fraction of objects that belong to the majority true class of their predicted cluster."""
    truth, pred = _pair(truth, pred)
    if truth.size == 0:
        raise ParameterError("purity needs at least one object")
    table = contingency_table(truth, pred)
    return float(table.max(axis=0).sum() / truth.size)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def mutual_information(table: np.ndarray) -> float:
    n = table.sum()
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    i, j = np.nonzero(table)
    nij = table[i, j].astype(float)
    return float((nij / n * np.log(n * nij / (a[i] * b[j]))).sum())


def expected_mutual_information(table: np.ndarray) -> float:
    """Expected MI of two labelings with the table's marginals under random permutation."""
    n = int(table.sum())
    a = table.sum(axis=1).astype(int)
    b = table.sum(axis=0).astype(int)
    lg_n = gammaln(n + 1)
    emi = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=float)
            log_p = (
                gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            emi += float((nij / n * np.log(n * nij / (ai * bj)) * np.exp(log_p)).sum())
    return emi


def ami(truth, pred) -> float:
    """Adjusted mutual information, normalized by the larger of the two entropies.

    Two single-cluster labelings are defined to agree perfectly (1.0).
    Natural logarithms are used throughout; the ratio does not depend on the base.
    """
    truth, pred = _pair(truth, pred)
    if truth.size == 0:
        raise ParameterError("AMI needs at least one object")
    table = contingency_table(truth, pred)
    n = truth.size
    h_true = _entropy(table.sum(axis=1), n)
    h_pred = _entropy(table.sum(axis=0), n)
    mi = mutual_information(table)
    emi = expected_mutual_information(table)
    denom = max(h_true, h_pred) - emi
    if abs(denom) < 1e-15:
        return 1.0
    return float((mi - emi) / denom)


def _pairs(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def rand_index(truth, pred) -> float:
    """Fraction of object pairs that both labelings put together or both keep apart."""
    truth, pred = _pair(truth, pred)
    n = truth.size
    if n < 2:
        raise ParameterError("the Rand index needs at least two objects")
    table = contingency_table(truth, pred)
    total = n * (n - 1) // 2
    together_both = int(_pairs(table).sum())
    together_true = int(_pairs(table.sum(axis=1)).sum())
    together_pred = int(_pairs(table.sum(axis=0)).sum())
    agree = total + 2 * together_both - together_true - together_pred
    return agree / total


def score_all(truth, pred) -> dict:
    return {"purity": purity(truth, pred), "ami": ami(truth, pred), "ri": rand_index(truth, pred)}
