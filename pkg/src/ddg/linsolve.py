"""Sparse linear solves under a relative-residual contract.

Every returned solution satisfies ``||b - A x|| <= rel_tol * ||b||``, or, for
badly scaled systems, sits at the round-off floor ``4 eps || |A||x| + |b| || / ||b||``
below which the residual cannot be evaluated in double precision.  Solves
that miss both raise :class:`LinearSolveError` instead of returning.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["LinearSolveError", "LinearSolver", "solve_linear", "gmres_jacobi", "roundoff_floor"]

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000
RESTART = 50
POLISH_CYCLES = 20
FLOOR_FACTOR = 4.0


class LinearSolveError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


def _relres(matrix, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - matrix @ x)
    return r / nb if nb > 0 else r


def roundoff_floor(matrix, x, b) -> float:
    """Relative residual that double-precision evaluation of b - Ax cannot resolve below."""
    nb = np.linalg.norm(b)
    scale = np.linalg.norm(abs(matrix) @ np.abs(x)) + nb
    return FLOOR_FACTOR * np.finfo(float).eps * scale / nb if nb > 0 else 0.0


def gmres_jacobi(matrix, b, rel_tol=1e-12, max_iter=2000, x0=None):
    """Restarted GMRES(50) with diagonal preconditioning.

    Falls back to the identity preconditioner when the diagonal has zeros.
    Returns the iterate; the caller checks the residual.
    """
    A = sp.csr_matrix(matrix)
    d = A.diagonal()
    if np.all(d != 0):
        M = sp.diags(1.0 / d)
    else:
        M = None
    x, _ = spla.gmres(A, b, x0=x0, rtol=rel_tol, atol=0.0, restart=RESTART, maxiter=max_iter, M=M)
    return x


class LinearSolver:
    """Reusable solver for one matrix.

    ``method`` is ``"auto"`` (sparse LU, then dense LU up to 2000 unknowns if
    the sparse factorisation fails), ``"gmres"`` (Jacobi-preconditioned GMRES
    only), ``"dense"`` or ``"splu"``.  The factorisation is reused across
    right-hand sides, which matters in long time loops.
    Direct solutions get up to five steps of iterative refinement and a
    GMRES polish before the residual contract is declared failed.
    """

    def __init__(self, matrix, method: str = "auto", rel_tol: float = 1e-12, max_iter: int = 2000):
        A = sp.csr_matrix(matrix)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.matrix = A
        self.rel_tol = rel_tol
        self.max_iter = max_iter
        if method not in ("auto", "dense", "splu", "gmres"):
            raise ValueError(f"unknown method {method!r}")
        self._factor = None
        if method in ("auto", "splu"):
            try:
                self._factor = spla.splu(A.tocsc()).solve
                method = "splu"
            except RuntimeError:
                self._factor = None
                if method == "auto":
                    method = "dense" if A.shape[0] <= DENSE_LIMIT else "gmres"
        self.method = method
        if method == "dense":
            dense = A.toarray()
            # a singular factor is detected below; silence scipy's own warning
            with np.errstate(all="ignore"), warnings.catch_warnings():
                warnings.simplefilter("ignore", la.LinAlgWarning)
                lu, piv = la.lu_factor(dense, check_finite=False)
            if np.any(np.diag(lu) == 0) or not np.all(np.isfinite(lu)):
                self._factor = None
            else:
                self._factor = lambda b: la.lu_solve((lu, piv), b, check_finite=False)

    @property
    def shape(self):
        return self.matrix.shape

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.matrix.shape[0],):
            raise ValueError(f"rhs has shape {b.shape}, expected ({self.matrix.shape[0]},)")
        if not np.any(b):
            return np.zeros_like(b)
        A = self.matrix
        x = None
        cycles = self.max_iter
        if self._factor is not None:
            x = self._factor(b)
            for _ in range(5):
                if not np.all(np.isfinite(x)) or _relres(A, x, b) <= self.rel_tol:
                    break
                x = x + self._factor(b - A @ x)
            if np.all(np.isfinite(x)):
                res = _relres(A, x, b)
                if res <= self.rel_tol:
                    return x
                floor = roundoff_floor(A, x, b)
                if res <= floor:
                    log.debug("residual %.3e accepted at the round-off floor %.3e", res, floor)
                    return x
                cycles = min(cycles, POLISH_CYCLES)
            else:
                x = None
        x = gmres_jacobi(A, b, self.rel_tol, cycles, x0=x)
        res = _relres(A, x, b) if np.all(np.isfinite(x)) else np.inf
        if res > max(self.rel_tol, roundoff_floor(A, x, b) if np.isfinite(res) else 0.0):
            raise LinearSolveError("linear solve did not reach the residual bound", res)
        return x


def solve_linear(matrix, b, rel_tol: float = 1e-12, max_iter: int = 2000, method: str = "auto") -> np.ndarray:
    return LinearSolver(matrix, method=method, rel_tol=rel_tol, max_iter=max_iter).solve(b)
