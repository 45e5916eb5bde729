"""Coefficient-matrix solvers.

Three ways of expressing every object through the others, ``X ~ X Z``:

* :func:`rosc_closed_form` - Frobenius regularization, solved exactly;
* :func:`solve_sparse_alm` - l1 regularization with a zero diagonal, inexact ALM;
* :func:`build_cast_matrix` - trace-Lasso regularization, one inexact-ALM
  problem per object (:func:`solve_cast_column`), batched over objects.

All three also pull ``Z`` towards the TKNN reachability matrix with weight
``alpha2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .core import (
    DimensionError,
    NumericError,
    ParameterError,
    SolverConfig,
    as_matrix,
    as_square,
    diag_part,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    objective: float
    mu_trace: tuple = field(default=(), repr=False)


# ---------------------------------------------------------------- primitives

def shrink(v, eta: float):
    """Soft thresholding ``sgn(v) * max(|v| - eta, 0)``, entrywise."""
    if eta < 0:
        raise ParameterError(f"eta must be >= 0, got {eta}")
    v = np.asarray(v, dtype=float)
    out = np.sign(v) * np.maximum(np.abs(v) - eta, 0.0)
    return float(out) if out.ndim == 0 else out


def svt(M, tau: float) -> np.ndarray:
    """Singular value thresholding: shrink every singular value of ``M`` by ``tau``."""
    if tau < 0:
        raise ParameterError(f"tau must be >= 0, got {tau}")
    M = as_matrix(M, "M")
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed: {exc}") from exc
    s = np.maximum(s - tau, 0.0)
    r = np.count_nonzero(s)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def nuclear_norm(M) -> float:
    return float(np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False).sum())


def trace_lasso(X, z) -> float:
    """``|| X Diag(z) ||_*``, the trace Lasso of ``z`` under feature matrix ``X``."""
    X = as_matrix(X, "X")
    z = np.asarray(z, dtype=float).ravel()
    if z.size != X.shape[1]:
        raise DimensionError(f"z has length {z.size}, X has {X.shape[1]} columns")
    return nuclear_norm(X * z)


def _svt_batch(M: np.ndarray, tau: float) -> np.ndarray:
    """SVT of a stack of wide ``p x n`` matrices (``p`` small) via their Gram matrices."""
    G = M @ M.transpose(0, 2, 1)
    w, U = np.linalg.eigh(G)
    s = np.sqrt(np.maximum(w, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(s > tau, (s - tau) / s, 0.0)
    P = (U * f[:, None, :]) @ U.transpose(0, 2, 1)
    return P @ M


# ---------------------------------------------------------------- ROSC

def rosc_objective(X, W, Z, alpha1: float, alpha2: float) -> float:
    """``|X - XZ|_F^2 + alpha1 |Z|_F^2 + alpha2 |Z - W|_F^2``."""
    X, W, Z = (np.asarray(a, dtype=float) for a in (X, W, Z))
    return float(
        np.sum((X - X @ Z) ** 2) + alpha1 * np.sum(Z ** 2) + alpha2 * np.sum((Z - W) ** 2)
    )


def _ridge_solve(X: np.ndarray, c: float, B: np.ndarray) -> np.ndarray:
    """``(X^T X + c I)^-1 B`` through the small ``p x p`` system (Woodbury)."""
    p = X.shape[0]
    K = np.linalg.solve(c * np.eye(p) + X @ X.T, X @ B)
    return (B - X.T @ K) / c


def rosc_closed_form(X, W, alpha1: float, alpha2: float) -> np.ndarray:
    """Exact minimizer ``(X^T X + (alpha1 + alpha2) I)^-1 (X^T X + alpha2 W)``."""
    if not alpha1 > 0:
        raise ParameterError(f"alpha1 must be > 0, got {alpha1}")
    if not alpha2 >= 0:
        raise ParameterError(f"alpha2 must be >= 0, got {alpha2}")
    X = as_matrix(X, "X")
    W = as_square(W, "W")
    if W.shape[0] != X.shape[1]:
        raise DimensionError("W must be n x n for a p x n feature matrix")
    G = X.T @ X
    try:
        return _ridge_solve(X, alpha1 + alpha2, G + alpha2 * W)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"ROSC linear solve failed: {exc}") from exc


# ---------------------------------------------------------------- ROSC-S (l1)

def sparse_objective(X, W, Z, alpha1: float, alpha2: float) -> float:
    """``1/2 |X - XZ|_F^2 + alpha1 |Z|_1 + alpha2/2 |Z - W|_F^2``."""
    X, W, Z = (np.asarray(a, dtype=float) for a in (X, W, Z))
    return float(
        0.5 * np.sum((X - X @ Z) ** 2)
        + alpha1 * np.abs(Z).sum()
        + 0.5 * alpha2 * np.sum((Z - W) ** 2)
    )


def solve_sparse_alm(X, W, cfg: SolverConfig) -> tuple[np.ndarray, SolveReport]:
    """l1-regularized coefficient matrix with ``diag(Z) = 0`` by inexact ALM.

    Splits ``Z`` into ``J = Z - Diag(Z)`` and alternates the closed-form
    ``J`` step, the soft-thresholding ``Z`` step and the multiplier ascent.
    Hitting ``max_iters`` is reported through ``converged=False``.
    """
    X = as_matrix(X, "X")
    W = as_square(W, "W")
    n = X.shape[1]
    if W.shape[0] != n:
        raise DimensionError("W must be n x n for a p x n feature matrix")
    a1, a2 = cfg.alpha1, cfg.alpha2
    G = X.T @ X
    lam, V = np.linalg.eigh(X @ X.T)
    base = G + a2 * W

    J = np.zeros((n, n))
    Z = np.zeros((n, n))
    Y = np.zeros((n, n))
    mu = cfg.mu0
    mus = []
    residual = np.inf
    it = 0
    while it < cfg.max_iters:
        it += 1
        mus.append(mu)
        c = a2 + mu
        R = base - Y + mu * (Z - diag_part(Z))
        # (G + c I)^-1 R with G = X^T X of rank <= p
        J = (R - X.T @ (V @ ((V.T @ (X @ R)) / (c + lam)[:, None]))) / c
        A = shrink(Y / mu + J, a1 / mu)
        Z = A - diag_part(A)
        C = J - Z + diag_part(Z)
        Y = Y + mu * C
        mu = min(cfg.rho * mu, cfg.mu_max)
        residual = float(np.abs(C).max())
        if not np.isfinite(residual):
            raise NumericError(f"ROSC-S iterates diverged at iteration {it}")
        if residual <= cfg.epsilon:
            break
    converged = residual <= cfg.epsilon
    if not converged:
        log.warning("ROSC-S stopped after %d iterations, residual %.3g", it, residual)
    report = SolveReport(
        converged=converged,
        iterations=it,
        residual=residual,
        objective=sparse_objective(X, W, Z, a1, a2),
        mu_trace=tuple(mus),
    )
    return Z, report


# ---------------------------------------------------------------- CAST (trace Lasso)

def cast_objective(x, Xr, z, w, alpha1: float, alpha2: float) -> float:
    """``1/2 |x - Xr z|^2 + alpha1 |Xr Diag(z)|_* + alpha2/2 |z - w|^2``."""
    x = np.asarray(x, dtype=float).ravel()
    Xr = np.asarray(Xr, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    return float(
        0.5 * np.sum((x - Xr @ z) ** 2)
        + alpha1 * trace_lasso(Xr, z)
        + 0.5 * alpha2 * np.sum((z - w) ** 2)
    )


@dataclass
class _CastBatch:
    z: np.ndarray  # (m, n)
    iterations: np.ndarray  # (m,)
    residual: np.ndarray  # (m,)
    mu_trace: tuple


def _cast_alm_batch(targets, D, Wt, skip, cfg: SolverConfig) -> _CastBatch:
    """Solve ``m`` independent trace-Lasso problems sharing the dictionary ``D``.

    Problem ``c`` represents ``targets[:, c]`` by the columns of ``D`` (p x n)
    with reachability target ``Wt[:, c]``. When ``skip[c] >= 0`` the column
    ``skip[c]`` of ``D`` is left out of problem ``c`` (its coefficient is
    pinned to zero), which is exactly the reduced problem on ``D`` minus that
    column. Every problem runs its own stopping test; converged problems are
    frozen while the rest continue, so the result equals sequential solving.
    """
    p, n = D.shape
    m = targets.shape[1]
    a1, a2 = cfg.alpha1, cfg.alpha2
    T = targets.T.copy()  # (m, p)
    Wr = Wt.T.copy()  # (m, n)
    keep = np.ones((m, n))
    has_skip = skip >= 0
    keep[np.flatnonzero(has_skip), skip[has_skip]] = 0.0
    Wr *= keep

    d = 1.0 + np.sum(D ** 2, axis=0)  # diagonal of I + Diag(D^T D)
    K = _woodbury_cores(D, skip, d)
    DtT = T @ D  # (m, n): D^T x per problem

    z = np.zeros((m, n))
    e = np.zeros((m, p))
    h = np.zeros((m, n))
    J = np.zeros((m, p, n))
    l1 = np.zeros((m, p))
    l2 = np.zeros((m, n))
    Y = np.zeros((m, p, n))

    z_out = np.zeros((m, n))
    it_out = np.full(m, cfg.max_iters)
    res_out = np.full(m, np.inf)
    active = np.arange(m)
    mu = cfg.mu0
    mus = []
    for it in range(1, cfg.max_iters + 1):
        mus.append(mu)
        kp = keep[active]
        # z-step: (D^T D + I + Diag(D^T D)) z = rhs, via Woodbury
        rhs = (
            -(l1 / mu + e) @ D
            + DtT[active]
            + l2 / mu
            + h
            + Wr[active]
            + np.einsum("mpn,pn->mn", Y / mu + J, D)
        ) * kp
        u = rhs / d
        s = np.einsum("mpq,mq->mp", K[active], u @ D.T)
        z = (u - (s @ D) / d) * kp
        Dz = z @ D.T  # (m, p)
        tgt = T[active]
        e = (mu / (mu + 1.0)) * (-l1 / mu + tgt - Dz)
        h = (mu / (a2 + mu)) * (-l2 / mu + z - Wr[active])
        XZ = D[None, :, :] * z[:, None, :]
        try:
            J = _svt_batch(XZ - Y / mu, a1 / mu)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"SVT failed at iteration {it}: {exc}") from exc
        r1 = e - tgt + Dz
        r2 = h - z + Wr[active]
        r3 = J - XZ
        l1 = l1 + mu * r1
        l2 = l2 + mu * r2
        Y = Y + mu * r3
        mu = min(cfg.rho * mu, cfg.mu_max)

        res = np.maximum.reduce([
            np.abs(r1).max(axis=1),
            np.abs(r2).max(axis=1),
            np.abs(r3).max(axis=(1, 2)),
        ])
        if not np.all(np.isfinite(res)):
            bad = active[np.flatnonzero(~np.isfinite(res))[0]]
            raise NumericError(f"trace-Lasso iterates diverged for problem {bad} at iteration {it}")
        done = res <= cfg.epsilon
        if it == cfg.max_iters:
            done[:] = True
        if done.any():
            idx = active[done]
            z_out[idx] = z[done]
            it_out[idx] = it
            res_out[idx] = res[done]
            stay = ~done
            active = active[stay]
            if active.size == 0:
                break
            z, e, h, J, l1, l2, Y = (a[stay] for a in (z, e, h, J, l1, l2, Y))
    return _CastBatch(z=z_out, iterations=it_out, residual=res_out, mu_trace=tuple(mus))


def _woodbury_cores(D: np.ndarray, skip: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Per-problem ``(I + Dr Diag(1/d) Dr^T)^-1`` where ``Dr`` drops column ``skip[c]``."""
    p = D.shape[0]
    m = skip.size
    base = np.eye(p) + (D / d) @ D.T
    K = np.broadcast_to(base, (m, p, p)).copy()
    has_skip = skip >= 0
    if has_skip.any():
        cols = D[:, skip[has_skip]]
        K[has_skip] -= np.einsum("pi,qi->ipq", cols, cols) / d[skip[has_skip]][:, None, None]
    try:
        return np.linalg.inv(K)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"trace-Lasso system is singular: {exc}") from exc


@nb.njit(cache=True, fastmath=True)
def _cast_column_kernel(x, D, w, skip, K, d, a1, a2, rho, mu0, mu_max, eps, max_iters):
    # Same iteration as _cast_alm_batch for a single problem. D is p x n; all
    # inner loops run along the n columns so they vectorize.
    p, n = D.shape
    z = np.zeros(n)
    h = np.zeros(n)
    l2 = np.zeros(n)
    u = np.zeros(n)
    s = np.zeros(n)
    cross = np.zeros(n)  # (Y_q / mu + J_q) . D_q, carried into the next z-step
    e = np.zeros(p)
    l1 = np.zeros(p)
    t = np.zeros(p)
    tk = np.zeros(p)
    Dz = np.zeros(p)
    f = np.zeros(p)
    J = np.zeros((p, n))
    Y = np.zeros((p, n))
    M = np.zeros((p, n))
    G = np.zeros((p, p))
    P = np.zeros((p, p))
    Dtx = np.zeros(n)
    for r in range(p):
        for q in range(n):
            Dtx[q] += D[r, q] * x[r]
    mu = mu0
    res = np.inf
    it = 0
    while it < max_iters:
        it += 1
        inv_mu = 1.0 / mu
        # z-step through the Woodbury identity
        for q in range(n):
            u[q] = Dtx[q] + l2[q] * inv_mu + h[q] + w[q] + cross[q]
        for r in range(p):
            tr = l1[r] * inv_mu + e[r]
            for q in range(n):
                u[q] -= tr * D[r, q]
        for q in range(n):
            u[q] /= d[q]
        if skip >= 0:
            u[skip] = 0.0
        for r in range(p):
            acc = 0.0
            for q in range(n):
                acc += D[r, q] * u[q]
            tk[r] = acc
        for r in range(p):
            acc = 0.0
            for c in range(p):
                acc += K[r, c] * tk[c]
            t[r] = acc
        for q in range(n):
            s[q] = 0.0
        for r in range(p):
            tr = t[r]
            for q in range(n):
                s[q] += D[r, q] * tr
        for q in range(n):
            z[q] = u[q] - s[q] / d[q]
        if skip >= 0:
            z[skip] = 0.0
        for r in range(p):
            acc = 0.0
            for q in range(n):
                acc += D[r, q] * z[q]
            Dz[r] = acc
        # e and h steps
        c1 = mu / (mu + 1.0)
        for r in range(p):
            e[r] = c1 * (-l1[r] * inv_mu + x[r] - Dz[r])
        c2 = mu / (a2 + mu)
        res = 0.0
        for q in range(n):
            hq = c2 * (-l2[q] * inv_mu + z[q] - w[q])
            h[q] = hq
            v = hq - z[q] + w[q]
            l2[q] += mu * v
            res = max(res, abs(v))
        for r in range(p):
            v = e[r] - x[r] + Dz[r]
            l1[r] += mu * v
            res = max(res, abs(v))
        # J-step: SVT of M = D Diag(z) - Y / mu via the p x p Gram matrix
        for r in range(p):
            for q in range(n):
                M[r, q] = D[r, q] * z[q] - Y[r, q] * inv_mu
        for i in range(p):
            for j in range(i + 1):
                acc = 0.0
                for q in range(n):
                    acc += M[i, q] * M[j, q]
                G[i, j] = acc
                G[j, i] = acc
        lam, U = np.linalg.eigh(G)
        tau = a1 * inv_mu
        for k in range(p):
            sk = np.sqrt(max(lam[k], 0.0))
            f[k] = (sk - tau) / sk if sk > tau else 0.0
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for k in range(p):
                    acc += U[i, k] * U[j, k] * f[k]
                P[i, j] = acc
        mu_next = min(rho * mu, mu_max)
        inv_next = 1.0 / mu_next
        for q in range(n):
            cross[q] = 0.0
        for r in range(p):
            for q in range(n):
                J[r, q] = 0.0
            for c in range(p):
                prc = P[r, c]
                for q in range(n):
                    J[r, q] += prc * M[c, q]
            for q in range(n):
                v = J[r, q] - D[r, q] * z[q]
                Y[r, q] += mu * v
                res = max(res, abs(v))
                cross[q] += (Y[r, q] * inv_next + J[r, q]) * D[r, q]
        mu = mu_next
        if not np.isfinite(res):
            break
        if res <= eps:
            break
    return z, it, res


def _cast_alm_numba(targets, D, Wt, skip, cfg: SolverConfig) -> _CastBatch:
    """Compiled counterpart of :func:`_cast_alm_batch`, one problem at a time."""
    m = targets.shape[1]
    n = D.shape[1]
    d = 1.0 + np.sum(D ** 2, axis=0)
    K = _woodbury_cores(D, skip, d)
    Dc = np.ascontiguousarray(D, dtype=float)
    z_out = np.zeros((m, n))
    it_out = np.zeros(m, dtype=int)
    res_out = np.zeros(m)
    for c in range(m):
        w = np.ascontiguousarray(Wt[:, c], dtype=float)
        if skip[c] >= 0:
            w[skip[c]] = 0.0
        z, it, res = _cast_column_kernel(
            np.ascontiguousarray(targets[:, c], dtype=float), Dc, w, int(skip[c]), K[c], d,
            cfg.alpha1, cfg.alpha2, cfg.rho, cfg.mu0, cfg.mu_max, cfg.epsilon, cfg.max_iters,
        )
        if not np.isfinite(res):
            raise NumericError(f"trace-Lasso iterates diverged for problem {c}")
        z_out[c], it_out[c], res_out[c] = z, it, res
    return _CastBatch(z=z_out, iterations=it_out, residual=res_out,
                      mu_trace=_mu_trace(cfg, int(it_out.max(initial=0))))


def _mu_trace(cfg: SolverConfig, iters: int) -> tuple:
    mus, mu = [], cfg.mu0
    for _ in range(iters):
        mus.append(mu)
        mu = min(cfg.rho * mu, cfg.mu_max)
    return tuple(mus)


_ENGINES = {"numba": _cast_alm_numba, "numpy": _cast_alm_batch}


def _engine(name: str):
    try:
        return _ENGINES[name]
    except KeyError:
        raise ParameterError(f"unknown engine {name!r}; choose from {sorted(_ENGINES)}") from None


def _check_unit_columns(M: np.ndarray, name: str, tol: float = 1e-6):
    norms = np.linalg.norm(M, axis=0)
    bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
    if bad.size:
        raise ParameterError(f"column {bad[0]} of {name} is not unit norm ({norms[bad[0]]:.6g})")


def solve_cast_column(x, Xr, w, cfg: SolverConfig, *, engine: str = "numba") -> tuple[np.ndarray, SolveReport]:
    """Trace-Lasso coefficients of one object ``x`` over the other objects ``Xr``."""
    x = np.asarray(x, dtype=float).ravel()
    Xr = as_matrix(Xr, "Xr")
    w = np.asarray(w, dtype=float).ravel()
    if x.size != Xr.shape[0]:
        raise DimensionError("x and Xr must have the same number of rows")
    if w.size != Xr.shape[1]:
        raise DimensionError("w must have one entry per column of Xr")
    _check_unit_columns(x[:, None], "x")
    _check_unit_columns(Xr, "Xr")
    if not np.all((w == 0) | (w == 1)):
        raise ParameterError("w must be binary")
    out = _engine(engine)(x[:, None], Xr, w[:, None], np.array([-1]), cfg)
    z = out.z[0]
    res = float(out.residual[0])
    report = SolveReport(
        converged=res <= cfg.epsilon,
        iterations=int(out.iterations[0]),
        residual=res,
        objective=cast_objective(x, Xr, z, w, cfg.alpha1, cfg.alpha2),
        mu_trace=out.mu_trace,
    )
    return z, report


def build_cast_matrix(X, W, cfg: SolverConfig, *, return_report: bool = False, engine: str = "numba"):
    """Coefficient matrix whose column ``i`` is the trace-Lasso code of object ``i``.

    Object ``i`` is represented by all other objects, with row ``i`` of
    ``W`` (minus its own entry) as reachability target; ``Z[i, i] = 0``.
    """
    X = as_matrix(X, "X")
    W = as_square(W, "W")
    n = X.shape[1]
    if W.shape[0] != n:
        raise DimensionError("W must be n x n for a p x n feature matrix")
    _check_unit_columns(X, "X")
    out = _engine(engine)(X, X, W.T, np.arange(n), cfg)
    Z = out.z.T.copy()
    np.fill_diagonal(Z, 0.0)
    if not return_report:
        return Z
    n_bad = int(np.count_nonzero(out.residual > cfg.epsilon))
    if n_bad:
        log.warning("%d of %d trace-Lasso problems hit max_iters", n_bad, n)
    objective = 0.0
    for i in range(n):
        others = np.arange(n) != i
        objective += cast_objective(X[:, i], X[:, others], Z[others, i], W[i, others],
                                    cfg.alpha1, cfg.alpha2)
    report = SolveReport(
        converged=n_bad == 0,
        iterations=int(out.iterations.max()),
        residual=float(out.residual.max()),
        objective=objective,
        mu_trace=out.mu_trace,
    )
    return Z, report
