"""Symmetric operators on Fields: apply, diagonal shifts, SPD solves,
extremal eigenvalues and square roots.

An operator inequality ``A > c`` is decided by the smallest eigenvalue of
the assembled symmetric matrix.  The weighted L2 inner product is a scalar
multiple of the Euclidean one, so matrix eigenvalues are also the operator
eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DimensionMismatch,
    NoConvergence,
    NotPositiveDefinite,
    NotPositiveSemidefinite,
)

__all__ = [
    "SymOp",
    "DENSE_LIMIT",
    "GT_MARGIN",
    "apply",
    "add_diag",
    "solve_spd",
    "min_eig",
    "max_eig",
    "matrix_gt",
    "sqrt_spd",
]

DENSE_LIMIT = 2000
GT_MARGIN = 1e-10


@dataclass(frozen=True, eq=False)
class SymOp:
    """``x -> base @ x + shift * x`` with ``base`` symmetric (sparse or dense)."""

    base: object
    shift: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.base.shape[0]
        if self.base.shape != (n, n):
            raise DimensionMismatch(f"operator must be square, got {self.base.shape}")
        shift = np.zeros(n) if self.shift is None else np.broadcast_to(
            np.asarray(self.shift, dtype=float), (n,)).copy()
        shift.setflags(write=False)
        object.__setattr__(self, "shift", shift)

    @property
    def n(self) -> int:
        return self.base.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.base)

    def diagonal(self) -> np.ndarray:
        d = self.base.diagonal() if self.is_sparse else np.diag(self.base)
        return np.asarray(d, dtype=float) + self.shift

    @cached_property
    def dense(self) -> np.ndarray:
        mat = self.base.toarray() if self.is_sparse else np.array(self.base, dtype=float)
        mat[np.diag_indices_from(mat)] += self.shift
        mat.setflags(write=False)
        return mat

    def matrix(self):
        """Sparse CSC assembly, for factorizations on large grids."""
        if self.is_sparse:
            return (self.base + sp.diags(self.shift)).tocsc()
        return sp.csc_matrix(self.dense)

    @cached_property
    def spectrum(self) -> np.ndarray:
        return sla.eigvalsh(self.dense)

    def __matmul__(self, x):
        return apply(self, x)


def _check(A: SymOp, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n,):
        raise DimensionMismatch(f"field of shape {x.shape} does not match operator of size {A.n}")
    return x


def apply(A: SymOp, x) -> np.ndarray:
    x = _check(A, x)
    return np.asarray(A.base @ x, dtype=float) + A.shift * x


def add_diag(A: SymOp, w) -> SymOp:
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        _check(A, w)
    return SymOp(A.base, A.shift + w)


def _cg(A: SymOp, b: np.ndarray, tol: float, maxiter: int) -> np.ndarray:
    # Plain CG that reports negative curvature instead of silently diverging.
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    target = (tol * np.linalg.norm(b)) ** 2
    for _ in range(maxiter):
        if rr <= target:
            return x
        Ap = apply(A, p)
        curv = p @ Ap
        if curv <= 0:
            raise NotPositiveDefinite(f"negative curvature p'Ap={curv:.3e} met in CG")
        step = rr / curv
        x += step * p
        r -= step * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NoConvergence("CG iteration cap reached", best=x, residual=np.sqrt(rr), iterations=maxiter)


def solve_spd(A: SymOp, b, tol: float = 1e-12) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Dense Cholesky up to ``DENSE_LIMIT`` unknowns, conjugate gradients above.
    """
    b = _check(A, b)
    if A.n <= DENSE_LIMIT:
        try:
            factor = sla.cho_factor(A.dense, lower=True, check_finite=True)
        except sla.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from None
        return sla.cho_solve(factor, b)
    if not np.any(b):
        return np.zeros_like(b)
    return _cg(A, b, tol, maxiter=10 * A.n)


def _extremal(A: SymOp, which: str, tol: float) -> float:
    if A.n <= DENSE_LIMIT:
        spec = A.spectrum
        return float(spec[0] if which == "SA" else spec[-1])
    if A.n == 0:
        return 0.0
    try:
        vals = spla.eigsh(A.matrix(), k=1, which=which, tol=tol, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(f"Lanczos did not converge: {exc}") from None
    return float(vals[0])


def min_eig(A: SymOp, tol: float = 1e-8) -> float:
    return _extremal(A, "SA", tol)


def max_eig(A: SymOp, tol: float = 1e-8) -> float:
    return _extremal(A, "LA", tol)


def matrix_gt(A: SymOp, c: float, margin: float = GT_MARGIN) -> bool:
    """Operator inequality ``A > c``: smallest eigenvalue exceeds ``c`` by ``margin``."""
    return min_eig(A) > c + margin


def sqrt_spd(A: SymOp) -> SymOp:
    """Principal square root by dense symmetric eigendecomposition."""
    vals, vecs = sla.eigh(A.dense)
    scale = max(1.0, float(np.max(np.abs(vals)))) if vals.size else 1.0
    if vals.size and vals[0] < -1e-12 * scale:
        raise NotPositiveSemidefinite(f"smallest eigenvalue {vals[0]:.3e} is negative")
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    root = 0.5 * (root + root.T)
    return SymOp(root)
