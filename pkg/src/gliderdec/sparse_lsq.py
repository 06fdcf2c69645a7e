"""Stacked weighted linear least squares.

Solves ``min_x sum_b w_b ||A_b x - d_b||^2`` where every block shares the
same unknowns. Right-hand sides may carry several columns (e.g. east and
north) that share one factorization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DENSE_ORACLE_MAX_UNKNOWNS = 2000
SINGULAR_CONDITION = 1e15
CGLS_TOL = 1e-10


class SolverError(RuntimeError):
    """Base class for least-squares solver failures."""


class SingularSystemError(SolverError):
    def __init__(self, message: str, condition_estimate: float = np.inf):
        self.condition_estimate = condition_estimate
        super().__init__(f"{message} (condition estimate {condition_estimate:.3g})")


class RankDeficientError(SolverError):
    pass


@dataclass(frozen=True)
class LsqBlock:
    """One row block ``weight * ||matrix @ x - rhs||^2`` of the objective."""

    matrix: sp.spmatrix
    rhs: np.ndarray
    weight: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "matrix", sp.csr_matrix(self.matrix, dtype=float))
        rhs = np.asarray(self.rhs, dtype=float)
        object.__setattr__(self, "rhs", rhs)
        if rhs.shape[0] != self.matrix.shape[0]:
            raise ValueError(f"block {self.name!r}: rhs has {rhs.shape[0]} rows, matrix has {self.matrix.shape[0]}")
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise ValueError(f"block {self.name!r}: weight must be positive and finite, got {self.weight}")
        if not np.all(np.isfinite(rhs)):
            raise ValueError(f"block {self.name!r}: rhs is not finite")

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x - self.rhs


@dataclass
class LsqSolution:
    x: np.ndarray
    residual_norms: dict[str, np.ndarray]
    normal_matrix_condition_estimate: float
    method: str = "cholesky"
    iterations: int = 0
    extras: dict = field(default_factory=dict)


def _stack(blocks: Sequence[LsqBlock], n_unknowns: int):
    if len(blocks) == 0:
        raise ValueError("no blocks to solve")
    ncols = {b.rhs.shape[1:] for b in blocks}
    if len(ncols) != 1:
        raise ValueError("blocks disagree on the number of right-hand sides")
    for b in blocks:
        if b.matrix.shape[1] != n_unknowns:
            raise ValueError(f"block {b.name!r} has {b.matrix.shape[1]} columns, expected {n_unknowns}")
    rows = sum(b.matrix.shape[0] for b in blocks)
    if rows < 1:
        raise ValueError("stacked system has no rows")
    A = sp.vstack([np.sqrt(b.weight) * b.matrix for b in blocks], format="csr")
    d = np.concatenate([np.sqrt(b.weight) * b.rhs for b in blocks], axis=0)
    return A, d


def _residual_norms(blocks: Sequence[LsqBlock], x: np.ndarray) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for i, b in enumerate(blocks):
        key = b.name or f"block{i}"
        out[key] = np.linalg.norm(b.residual(x), axis=0)
    return out


def _unit_start(n: int) -> np.ndarray:
    v = 1.0 + 0.5 * np.sin(np.arange(n) * 0.7)
    return v / np.linalg.norm(v)


def condition_estimate(N: sp.spmatrix, inverse_apply, iterations: int = 20) -> float:
    """Ratio of power-iteration estimates of the largest and smallest eigenvalues of ``N``."""
    v = _unit_start(N.shape[0])
    lam_max = 0.0
    for _ in range(iterations):
        w = N @ v
        lam_max = float(np.linalg.norm(w))
        if lam_max == 0.0:
            return np.inf
        v = w / lam_max
    v = _unit_start(N.shape[0])
    mu = 0.0
    for _ in range(iterations):
        w = inverse_apply(v)
        mu = float(np.linalg.norm(w))
        if not np.isfinite(mu) or mu == 0.0:
            return np.inf
        v = w / mu
    return lam_max * mu


def cgls(A: sp.spmatrix, d: np.ndarray, tol: float = CGLS_TOL, max_iter: Optional[int] = None):
    """Conjugate gradients on the normal equations for one right-hand side.

    Stops when ``||A^T r|| <= tol * ||A^T d||``. Returns ``(x, iterations, converged)``.
    """
    n = A.shape[1]
    max_iter = 10 * n if max_iter is None else max_iter
    x = np.zeros(n)
    r = d.copy()
    s = A.T @ r
    p = s.copy()
    gamma = float(s @ s)
    stop = tol * np.sqrt(gamma)
    if gamma == 0.0:
        return x, 0, True
    for it in range(1, max_iter + 1):
        q = A @ p
        alpha = gamma / float(q @ q)
        x += alpha * p
        r -= alpha * q
        s = A.T @ r
        gamma_new = float(s @ s)
        if np.sqrt(gamma_new) <= stop:
            return x, it, True
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return x, max_iter, False


def _smallest_eigenvalue(N: sp.spmatrix) -> float:
    if N.shape[0] <= 3000:
        return float(scipy.linalg.eigvalsh(N.toarray(), subset_by_index=[0, 0])[0])
    return float(spla.eigsh(N, k=1, which="SA", return_eigenvectors=False, tol=1e-6)[0])


def solve(blocks: Sequence[LsqBlock], n_unknowns: int, refine_steps: int = 2) -> LsqSolution:
    """Minimize the stacked weighted least-squares objective.

    The sparse normal matrix is factored with a symmetric fill-reducing
    ordering and no pivoting, so positive pivots certify positive
    definiteness. The solution is polished with a few steps of iterative
    refinement against the stacked residual. If the factorization breaks
    down the solve falls back to CGLS, unless the condition estimate shows
    the normal matrix is numerically singular, in which case
    :class:`SingularSystemError` is raised.
    """
    A, d = _stack(blocks, n_unknowns)
    squeeze = d.ndim == 1
    D = d[:, None] if squeeze else d
    N = (A.T @ A).tocsc()
    N.sum_duplicates()
    B = A.T @ D

    lu = None
    pivots = None
    try:
        lu = spla.splu(N, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
        pivots = lu.U.diagonal()
    except RuntimeError:
        lu = None

    healthy = lu is not None and np.all(np.isfinite(pivots)) and np.all(pivots > 0)
    cond = condition_estimate(N, lu.solve) if healthy else np.inf
    if healthy and cond < SINGULAR_CONDITION:
        X = lu.solve(B)
        for _ in range(refine_steps):
            X += lu.solve(A.T @ (D - A @ X))
        method, iterations = "cholesky", 0
    else:
        if not healthy:
            lam_min = _smallest_eigenvalue(N)
            lam_max = float(spla.norm(N, 1))
            cond = lam_max / lam_min if lam_min > 0 else np.inf
        if not cond < SINGULAR_CONDITION:
            raise SingularSystemError("normal matrix is singular or indefinite", cond)
        log.warning("factorization lost positivity (cond ~ %.3g); falling back to CGLS", cond)
        cols, iterations = [], 0
        for j in range(D.shape[1]):
            xj, it, ok = cgls(A, D[:, j])
            if not ok:
                raise SingularSystemError("CGLS did not converge", cond)
            cols.append(xj)
            iterations = max(iterations, it)
        X = np.column_stack(cols)
        method = "cgls"

    if not np.all(np.isfinite(X)):
        raise SingularSystemError("solution is not finite", cond)
    x = X[:, 0] if squeeze else X
    return LsqSolution(x=x, residual_norms=_residual_norms(blocks, x),
                       normal_matrix_condition_estimate=float(cond), method=method, iterations=iterations)


def dense_oracle_solve(blocks: Sequence[LsqBlock], n_unknowns: int) -> LsqSolution:
    """Reference solve via column-pivoted dense QR of the stacked, scaled matrix."""
    if n_unknowns > DENSE_ORACLE_MAX_UNKNOWNS:
        raise ValueError(f"dense oracle limited to {DENSE_ORACLE_MAX_UNKNOWNS} unknowns")
    A, d = _stack(blocks, n_unknowns)
    Ad = A.toarray()
    m, n = Ad.shape
    if m < n:
        raise RankDeficientError(f"{m} rows cannot determine {n} unknowns")
    Q, R, perm = scipy.linalg.qr(Ad, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(m, n) * np.finfo(float).eps * diag[0]
    rank = int(np.sum(diag > tol))
    if rank < n:
        raise RankDeficientError(f"stacked matrix has rank {rank} < {n}")
    y = Q.T @ d
    z = scipy.linalg.solve_triangular(R, y)
    x = np.empty_like(z)
    x[perm] = z
    cond = float((diag[0] / diag[-1]) ** 2)
    return LsqSolution(x=x, residual_norms=_residual_norms(blocks, x),
                       normal_matrix_condition_estimate=cond, method="dense_qr")


def objective_gradient(blocks: Sequence[LsqBlock], x: np.ndarray) -> np.ndarray:
    """Gradient ``2 sum_b w_b A_b^T (A_b x - d_b)``."""
    g = np.zeros_like(np.asarray(x, dtype=float))
    for b in blocks:
        g = g + 2.0 * b.weight * (b.matrix.T @ b.residual(x))
    return g
