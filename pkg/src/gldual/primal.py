"""Critical points of J: damped Newton, the proximal fixed-point iteration,
and classification by the spectrum of the second variation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import NoConvergence, NotConvex, NotPositiveDefinite
from .grid import Grid, as_field
from .linalg import DENSE_LIMIT, SymOp, add_diag, apply, max_eig, min_eig, solve_spd
from .model import ModelParams, energy_J, energy_Jhat, grad_J, hess_J

__all__ = [
    "Classification",
    "CriticalPoint",
    "ProxResult",
    "newton",
    "prox_step",
    "prox_iterate",
    "classify",
    "convexity_K",
    "critical_point",
    "DEGENERACY_MARGIN",
]

DEGENERACY_MARGIN = 1e-8
ARMIJO = 1e-4
MAX_BACKTRACKS = 30


class Classification(str, enum.Enum):
    LOCAL_MIN = "LocalMin"
    LOCAL_MAX = "LocalMax"
    SADDLE = "Saddle"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    u0: np.ndarray
    residual_norm: float
    classification: Classification
    min_eig_hess: float
    max_eig_hess: float
    iterations: int


@dataclass(frozen=True, eq=False)
class ProxResult:
    point: CriticalPoint
    trace: list = field(default_factory=list)


def _solve_symmetric(A: SymOp, rhs: np.ndarray) -> np.ndarray:
    # Newton systems may be indefinite near maxima and saddles: plain LU.
    if A.n <= DENSE_LIMIT:
        return sla.solve(A.dense, rhs, assume_a="sym")
    return spla.spsolve(A.matrix(), rhs)


def _classify_from(lo: float, hi: float, margin: float) -> Classification:
    scale = max(1.0, abs(lo), abs(hi))
    m = margin * scale
    if abs(lo) <= m or abs(hi) <= m:
        return Classification.DEGENERATE
    if lo > m:
        return Classification.LOCAL_MIN
    if hi < -m:
        return Classification.LOCAL_MAX
    return Classification.SADDLE


def critical_point(params: ModelParams, grid: Grid, u, iterations: int = 0,
                   margin: float = DEGENERACY_MARGIN) -> CriticalPoint:
    """Package ``u`` with its residual and spectral classification."""
    u = as_field(grid, u, "u").copy()
    H = hess_J(params, grid, u)
    lo, hi = min_eig(H), max_eig(H)
    u.setflags(write=False)
    return CriticalPoint(
        u0=u,
        residual_norm=float(np.linalg.norm(grad_J(params, grid, u))),
        classification=_classify_from(lo, hi, margin),
        min_eig_hess=lo,
        max_eig_hess=hi,
        iterations=iterations,
    )


def newton(params: ModelParams, grid: Grid, u_init, tol: float = 1e-10,
           maxit: int = 50) -> CriticalPoint:
    """Damped Newton for ``grad_J(u) = 0``, backtracking on ``||grad_J||``.

    Indefinite Newton systems are solved as they are, so maxima and saddles
    are reachable.  When the Newton step fails to reduce the residual the
    method falls back to the steepest-descent direction of ``||grad_J||^2``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    u = as_field(grid, u_init, "u_init").copy()
    g = grad_J(params, grid, u)
    res = float(np.linalg.norm(g))
    it = 0
    while res > tol:
        if it >= maxit:
            raise NoConvergence(f"Newton stopped after {maxit} iterations, residual {res:.3e}",
                                best=u, residual=res, iterations=it)
        H = hess_J(params, grid, u)
        directions = []
        try:
            step = _solve_symmetric(H, -g)
            if np.all(np.isfinite(step)):
                directions.append(step)
        except (sla.LinAlgError, RuntimeError):
            pass
        directions.append(-apply(H, g))
        for d in directions:
            t = 1.0
            for _ in range(MAX_BACKTRACKS):
                trial = u + t * d
                g_trial = grad_J(params, grid, trial)
                r_trial = float(np.linalg.norm(g_trial))
                if r_trial <= (1.0 - ARMIJO * t) * res:
                    break
                t *= 0.5
            else:
                continue
            u, g, res = trial, g_trial, r_trial
            break
        else:
            raise NoConvergence(f"line search failed at residual {res:.3e}",
                                best=u, residual=res, iterations=it)
        it += 1
    return critical_point(params, grid, u, iterations=it)


def prox_step(params: ModelParams, grid: Grid, p, tol: float = 1e-10, u_init=None,
              maxit: int = 100) -> np.ndarray:
    """``argmin_u Jhat(u, p)`` by Newton with an Armijo search on ``Jhat``.

    Starts from ``u_init`` (default ``p``); because the search is monotone,
    ``Jhat(result, p) <= Jhat(u_init, p)``.
    """
    p = as_field(grid, p, "p")
    K = params.K
    u = (p if u_init is None else as_field(grid, u_init, "u_init")).copy()
    g = grad_J(params, grid, u) + K * (u - p)
    val = energy_Jhat(params, grid, u, p)
    it = 0
    while float(np.linalg.norm(g)) > tol:
        if it >= maxit:
            raise NoConvergence("prox_step iteration cap reached", best=u,
                                residual=float(np.linalg.norm(g)), iterations=it)
        H = add_diag(hess_J(params, grid, u), K)
        try:
            d = solve_spd(H, -g)
        except NotPositiveDefinite:
            # Shift the model Hessian just enough to make it positive definite.
            shift = -min_eig(H) + 1e-6 * max(1.0, abs(max_eig(H)))
            d = solve_spd(add_diag(H, shift), -g)
        slope = grid.weight * float(g @ d)
        if -slope <= 1e-13 * (1.0 + abs(val)):
            # Predicted decrease is below value roundoff: judge the full step by the gradient.
            trial = u + d
            g_trial = grad_J(params, grid, trial) + K * (trial - p)
            if np.linalg.norm(g_trial) >= np.linalg.norm(g):
                break
            u, g, val = trial, g_trial, energy_Jhat(params, grid, trial, p)
            it += 1
            continue
        t = 1.0
        for _ in range(MAX_BACKTRACKS):
            trial = u + t * d
            v_trial = energy_Jhat(params, grid, trial, p)
            if v_trial <= val + ARMIJO * t * slope:
                break
            t *= 0.5
        else:
            break  # no further decrease representable; accept current iterate
        u, val = trial, v_trial
        g = grad_J(params, grid, u) + K * (u - p)
        it += 1
    H = add_diag(hess_J(params, grid, u), K)
    if min_eig(H) <= 0:
        raise NotConvex(f"Jhat(., p) is not convex at its stationary point (K={K})")
    if float(np.linalg.norm(g)) > tol:
        raise NoConvergence("prox_step stalled above tolerance", best=u,
                            residual=float(np.linalg.norm(g)), iterations=it)
    return u


def prox_iterate(params: ModelParams, grid: Grid, p0, tol: float = 1e-10,
                 maxit: int = 10000) -> ProxResult:
    """Iterate ``u_{k+1} = prox_step(u_k)`` until successive iterates agree to ``tol``.

    The returned trace holds ``J(u_k)`` for every iterate, starting at ``p0``,
    and is non-increasing.
    """
    u = as_field(grid, p0, "p0").copy()
    trace = [energy_J(params, grid, u)]
    for k in range(1, maxit + 1):
        u_next = prox_step(params, grid, u, tol=tol, u_init=u)
        trace.append(energy_J(params, grid, u_next))
        moved = float(np.linalg.norm(u_next - u))
        u = u_next
        if moved <= tol:
            return ProxResult(critical_point(params, grid, u, iterations=k), trace)
    raise NoConvergence(f"prox_iterate did not settle in {maxit} steps", best=u,
                        residual=float(np.linalg.norm(grad_J(params, grid, u))), iterations=maxit)


def classify(params: ModelParams, grid: Grid, u, margin: float = DEGENERACY_MARGIN) -> Classification:
    H = hess_J(params, grid, u)
    return _classify_from(min_eig(H), max_eig(H), margin)


def convexity_K(params: ModelParams, grid: Grid, u) -> float:
    """Smallest K with ``hess_J(u) + K I`` positive semidefinite."""
    return max(0.0, -min_eig(hess_J(params, grid, u)))
