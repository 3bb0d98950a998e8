"""Dual of the proximal formulation: dual triples, the feasible set B*,
the conjugates G*, F*, the dual functional J*, its nested reductions
J8* (sup over v0*), J3* (inf over a p-ball) and J5* (sup over a p-ball),
curvature checks against closed-form predictions, and a diagnostic for the
non-proximal dual.

Conventions
-----------
``A(v0*) = L + diag(2 v0*) + (K + eps) I`` and ``w = v* + K p``.  Integrals of
the form ``int w^2 / A`` are the quadratic form ``<A^{-1} w, w>`` in the
weighted inner product.  Gradients returned here are nodal Riesz
representatives, like ``model.grad_J``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    LeftBstar,
    NoConvergence,
    NotInBstar,
    PreconditionError,
)
from .grid import Grid, as_field, integrate
from .linalg import DENSE_LIMIT, GT_MARGIN, SymOp, add_diag, max_eig, min_eig, solve_spd
from .model import ModelParams, energy_J, grad_J, hess_J, laplacian
from .primal import Classification, critical_point
from .report import Report, Table

__all__ = [
    "DualTriple",
    "BallSpec",
    "NestedResult",
    "NaiveDualDiagnostic",
    "build_dual_triple",
    "default_ball",
    "bstar_operator",
    "bstar_margin",
    "in_Bstar",
    "eval_Gstar",
    "eval_Fstar",
    "eval_H",
    "eval_Jstar",
    "grad_Jstar",
    "sup_v0",
    "eval_J8",
    "eval_J3",
    "eval_J5",
    "d2_J3_check",
    "d2_J8_p_check",
    "naive_dual_curvature",
    "verify_thm1",
]

CRITICAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DualTriple:
    vstar: np.ndarray
    v0star: np.ndarray
    p: np.ndarray


@dataclass(frozen=True, eq=False)
class BallSpec:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    def project(self, x: np.ndarray) -> np.ndarray:
        offset = x - self.center
        dist = float(np.linalg.norm(offset))
        if dist <= self.radius:
            return x
        return self.center + offset * (self.radius / dist)

    def is_interior(self, x: np.ndarray, rel: float = 1e-9) -> bool:
        return float(np.linalg.norm(x - self.center)) < self.radius * (1.0 - rel)


@dataclass(frozen=True, eq=False)
class NestedResult:
    value: float
    p: np.ndarray
    v0star: np.ndarray
    interior: bool
    iterations: int


@dataclass(frozen=True)
class NaiveDualDiagnostic:
    min_eig: float
    max_eig: float
    status: str  # "positive-definite", "negative-definite", "indefinite" or "degenerate"

    @property
    def indefinite(self) -> bool:
        return self.status in ("indefinite", "degenerate")


def default_ball(center) -> BallSpec:
    center = np.asarray(center, dtype=float)
    return BallSpec(center, 0.25 * (1.0 + float(np.linalg.norm(center))))


def build_dual_triple(params: ModelParams, grid: Grid, u0) -> DualTriple:
    u0 = as_field(grid, u0, "u0")
    return DualTriple(
        vstar=params.eps * u0 + params.f,
        v0star=params.alpha * (u0 * u0 - params.beta),
        p=u0.copy(),
    )


def bstar_operator(params: ModelParams, grid: Grid, v0star) -> SymOp:
    v0star = as_field(grid, v0star, "v0star")
    return add_diag(laplacian(params, grid), 2.0 * v0star + params.K + params.eps)


def bstar_margin(params: ModelParams, grid: Grid, v0star) -> float:
    """``min_eig(A(v0*)) - K/2``; positive inside B*."""
    return min_eig(bstar_operator(params, grid, v0star)) - 0.5 * params.K


def in_Bstar(params: ModelParams, grid: Grid, v0star) -> bool:
    return bstar_margin(params, grid, v0star) > GT_MARGIN


def eval_Fstar(params: ModelParams, grid: Grid, vstar) -> float:
    vstar = as_field(grid, vstar, "vstar")
    return integrate(grid, (vstar - params.f) ** 2) / (2.0 * params.eps)


def eval_H(params: ModelParams, grid: Grid, p) -> float:
    p = as_field(grid, p, "p")
    return 0.5 * params.K * integrate(grid, p * p)


def _gstar_terms(params, grid, v0star, w, A=None):
    A = bstar_operator(params, grid, v0star) if A is None else A
    z = solve_spd(A, w)
    value = (0.5 * integrate(grid, z * w)
             + integrate(grid, v0star * v0star) / (2.0 * params.alpha)
             + params.beta * integrate(grid, v0star))
    return value, z


def _require_bstar(params, grid, v0star):
    margin = bstar_margin(params, grid, v0star)
    if not margin > GT_MARGIN:
        raise NotInBstar(f"v0* outside B*: min_eig(A) - K/2 = {margin:.6e}")


def eval_Gstar(params: ModelParams, grid: Grid, t: DualTriple) -> float:
    _require_bstar(params, grid, t.v0star)
    w = as_field(grid, t.vstar, "vstar") + params.K * as_field(grid, t.p, "p")
    return _gstar_terms(params, grid, t.v0star, w)[0]


def eval_Jstar(params: ModelParams, grid: Grid, t: DualTriple) -> float:
    return -eval_Gstar(params, grid, t) + eval_Fstar(params, grid, t.vstar) + eval_H(params, grid, t.p)


def grad_Jstar(params: ModelParams, grid: Grid, t: DualTriple):
    """Partial gradients of J* with respect to (v*, v0*, p)."""
    _require_bstar(params, grid, t.v0star)
    w = t.vstar + params.K * t.p
    z = solve_spd(bstar_operator(params, grid, t.v0star), w)
    d_vstar = (t.vstar - params.f) / params.eps - z
    d_v0star = z * z - t.v0star / params.alpha - params.beta
    d_p = params.K * t.p - params.K * z
    return d_vstar, d_v0star, d_p


# --- sup over v0* -----------------------------------------------------------

def _feasible_factor(params, grid, v0star):
    """Cholesky of A(v0*) if v0* lies in B*, else None."""
    A = bstar_operator(params, grid, v0star)
    if A.n > DENSE_LIMIT:
        return A if min_eig(A) > 0.5 * params.K + GT_MARGIN else None
    shifted = A.dense - (0.5 * params.K + GT_MARGIN) * np.eye(A.n)
    try:
        sla.cholesky(shifted, lower=True)
    except sla.LinAlgError:
        return None
    return sla.cho_factor(A.dense, lower=True)


def _gstar_at(params, grid, v0star, w, factor):
    z = sla.cho_solve(factor, w) if isinstance(factor, tuple) else solve_spd(factor, w)
    value = (0.5 * integrate(grid, z * w)
             + integrate(grid, v0star * v0star) / (2.0 * params.alpha)
             + params.beta * integrate(grid, v0star))
    return value, z


def sup_v0(params: ModelParams, grid: Grid, vstar, p, v0_init=None, tol: float = 1e-13,
           maxit: int = 100):
    """Maximize J*(v*, ., p) over B*.  Returns ``(v0*, J8*(v*, p))``.

    J* is concave in v0* (G* is a matrix-fractional function plus a convex
    quadratic), so the maximizer solves ``z^2 - v0*/alpha - beta = 0`` with
    ``z = A(v0*)^{-1} w``.  Newton on that equation with step halving keeps
    every iterate inside B*; grids above the dense limit use the damped
    fixed point ``v0* <- alpha (z^2 - beta)`` instead.
    """
    vstar = as_field(grid, vstar, "vstar")
    p = as_field(grid, p, "p")
    w = vstar + params.K * p
    a = params.alpha
    if v0_init is None:
        z0 = solve_spd(add_diag(laplacian(params, grid), params.K + params.eps), w)
        v0 = a * (z0 * z0 - params.beta)
        if _feasible_factor(params, grid, v0) is None:
            v0 = np.zeros(grid.N)
    else:
        v0 = as_field(grid, v0_init, "v0_init").copy()
    factor = _feasible_factor(params, grid, v0)
    if factor is None:
        raise LeftBstar("starting v0* is outside B*")
    val, z = _gstar_at(params, grid, v0, w, factor)
    newton = grid.N <= DENSE_LIMIT
    converged = False
    for it in range(maxit):
        g = -z * z + v0 / a + params.beta
        if float(np.max(np.abs(g))) <= tol * (1.0 + float(np.max(np.abs(v0))) / a):
            converged = True
            break
        if newton:
            Ainv = sla.cho_solve(factor, np.eye(grid.N))
            hess = 4.0 * (z[:, None] * Ainv * z[None, :]) + np.eye(grid.N) / a
            d = -sla.solve(hess, g, assume_a="pos")
        else:
            d = a * (z * z - params.beta) - v0
        slope = grid.weight * float(g @ d)
        small = -slope <= 1e-14 * (1.0 + abs(val))
        step = 1.0
        for _ in range(60):
            trial = v0 + step * d
            f_trial = _feasible_factor(params, grid, trial)
            if f_trial is not None:
                v_trial, z_trial = _gstar_at(params, grid, trial, w, f_trial)
                if small or v_trial <= val + 1e-4 * step * slope:
                    break
            step *= 0.5
        else:
            raise LeftBstar("could not find a feasible ascent step inside B*")
        if small and v_trial > val + 1e-12 * (1.0 + abs(val)):
            converged = True  # roundoff floor reached
            break
        v0, val, z, factor = trial, v_trial, z_trial, f_trial
    if not converged:
        g = -z * z + v0 / a + params.beta
        if float(np.max(np.abs(g))) > 1e-9 * (1.0 + float(np.max(np.abs(v0))) / a):
            raise NoConvergence("sup over v0* did not converge", best=v0,
                                residual=float(np.max(np.abs(g))), iterations=maxit)
    if not in_Bstar(params, grid, v0):
        raise LeftBstar("maximizer left B*")
    value = -val + eval_Fstar(params, grid, vstar) + eval_H(params, grid, p)
    return v0, value


def eval_J8(params: ModelParams, grid: Grid, vstar, p, v0_init=None):
    """``J8*(v*, p)`` with the maximizing v0* and ``z = A^{-1}(v* + K p)``."""
    v0, value = sup_v0(params, grid, vstar, p, v0_init=v0_init)
    w = as_field(grid, vstar, "vstar") + params.K * as_field(grid, p, "p")
    z = solve_spd(bstar_operator(params, grid, v0), w)
    return value, v0, z


# --- J3* / J5*: optimize J8* over a ball in p --------------------------------

def _nested(params, grid, vstar, pball: BallSpec, sense: int, tol: float, maxit: int,
            p_init=None, v0_init=None) -> NestedResult:
    # sense=+1 minimizes J8* over the ball (J3*), sense=-1 maximizes it (J5*).
    vstar = as_field(grid, vstar, "vstar")
    K = params.K
    p = pball.project(as_field(grid, pball.center if p_init is None else p_init, "p").copy())
    val, v0, z = eval_J8(params, grid, vstar, p, v0_init)
    g = sense * K * (p - z)
    step = 1.0 / K
    it = 0
    for it in range(1, maxit + 1):
        t = step
        for _ in range(50):
            p_new = pball.project(p - t * g)
            try:
                val_new, v0_new, z_new = eval_J8(params, grid, vstar, p_new, v0)
            except (LeftBstar, NoConvergence):
                t *= 0.5
                continue
            if sense * (val_new - val) <= 1e-14 * (1.0 + abs(val)):
                break
            t *= 0.5
        else:
            break
        g_new = sense * K * (p_new - z_new)
        s, y = p_new - p, g_new - g
        moved = float(np.linalg.norm(s))
        p, val, v0, z, g = p_new, val_new, v0_new, z_new, g_new
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 1.0 / K
        step = min(max(step, 1e-6 / K), 1e6 / K)
        pg = np.linalg.norm(p - pball.project(p - g / K)) * K
        if moved <= tol * (1.0 + float(np.linalg.norm(p))) or pg <= 1e-12 * (1.0 + K):
            break
    return NestedResult(value=val, p=p, v0star=v0, interior=pball.is_interior(p), iterations=it)


def eval_J3(params: ModelParams, grid: Grid, vstar, pball: BallSpec, tol: float = 1e-14,
            maxit: int = 2000, p_init=None, v0_init=None) -> NestedResult:
    """``J3*(v*) = inf over the p-ball of sup over B* of J*`` by projected gradient."""
    return _nested(params, grid, vstar, pball, +1, tol, maxit, p_init, v0_init)


def eval_J5(params: ModelParams, grid: Grid, vstar, pball: BallSpec, tol: float = 1e-14,
            maxit: int = 2000, p_init=None, v0_init=None) -> NestedResult:
    """``J5*(v*) = sup over the p-ball of sup over B* of J*``."""
    return _nested(params, grid, vstar, pball, -1, tol, maxit, p_init, v0_init)


# --- curvature checks ---------------------------------------------------------

def _directions(grid: Grid, ndirs: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((ndirs, grid.N))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _require_critical(params, grid, u0, tol=CRITICAL_TOL):
    res = float(np.linalg.norm(grad_J(params, grid, u0)))
    if res > tol:
        raise PreconditionError(f"u0 is not critical: ||grad_J(u0)|| = {res:.3e} > {tol:g}")
    return res


def d2_J3_check(params: ModelParams, grid: Grid, u0, ndirs: int = 5, seed: int = 0,
                radius: float | None = None, sense: str = "inf", step: float | None = None):
    """Second differences of J3* (``sense="inf"``) or J5* (``"sup"``) at v-hat
    against the predicted form ``<(1/eps) d, d> - <(hess_J(u0) + eps)^{-1} d, d>``.

    Returns one row per random unit direction.
    """
    u0 = as_field(grid, u0, "u0")
    _require_critical(params, grid, u0)
    H = hess_J(params, grid, u0)
    lo, hi = min_eig(H), max_eig(H)
    if sense == "inf" and not lo > 0:
        raise PreconditionError(f"J3* check needs hess_J(u0) > 0, min eig {lo:.3e}")
    if sense == "sup" and not hi < 0:
        raise PreconditionError(f"J5* check needs hess_J(u0) < 0, max eig {hi:.3e}")
    t = build_dual_triple(params, grid, u0)
    _require_bstar(params, grid, t.v0star)
    ball = default_ball(t.p) if radius is None else BallSpec(t.p, radius)
    nested = eval_J3 if sense == "inf" else eval_J5
    D = H.dense + params.eps * np.eye(grid.N)
    h = step if step is not None else 1e-4 * (1.0 + float(np.linalg.norm(t.vstar)))
    center = nested(params, grid, t.vstar, ball, p_init=t.p, v0_init=t.v0star)
    rows = []
    for k, d in enumerate(_directions(grid, ndirs, seed)):
        plus = nested(params, grid, t.vstar + h * d, ball, p_init=t.p, v0_init=t.v0star)
        minus = nested(params, grid, t.vstar - h * d, ball, p_init=t.p, v0_init=t.v0star)
        fd = (plus.value - 2.0 * center.value + minus.value) / h**2
        predicted = grid.weight * (float(d @ d) / params.eps - float(d @ sla.solve(D, d, assume_a="sym")))
        rows.append({
            "direction": k,
            "fd": fd,
            "predicted": predicted,
            "rel_mismatch": abs(fd - predicted) / abs(predicted),
            "interior": bool(plus.interior and minus.interior and center.interior),
        })
    return rows


def d2_J8_p_check(params: ModelParams, grid: Grid, u0, ndirs: int = 5, seed: int = 1,
                  step: float | None = None):
    """Second differences of ``p -> J8*(v-hat, p)`` at p-hat against
    ``K (hess_J + eps) (L + 4 alpha u0^2 + 2 v0-hat + K + eps)^{-1}``."""
    u0 = as_field(grid, u0, "u0")
    _require_critical(params, grid, u0)
    t = build_dual_triple(params, grid, u0)
    _require_bstar(params, grid, t.v0star)
    K, eps, a = params.K, params.eps, params.alpha
    D = hess_J(params, grid, u0).dense + eps * np.eye(grid.N)
    denom = add_diag(laplacian(params, grid), 4.0 * a * u0 * u0 + 2.0 * t.v0star + K + eps).dense
    h = step if step is not None else 1e-4 * (1.0 + float(np.linalg.norm(t.p)))
    center = sup_v0(params, grid, t.vstar, t.p, v0_init=t.v0star)[1]
    rows = []
    for k, d in enumerate(_directions(grid, ndirs, seed)):
        plus = sup_v0(params, grid, t.vstar, t.p + h * d, v0_init=t.v0star)[1]
        minus = sup_v0(params, grid, t.vstar, t.p - h * d, v0_init=t.v0star)[1]
        fd = (plus - 2.0 * center + minus) / h**2
        predicted = grid.weight * K * float(d @ (D @ sla.solve(denom, d, assume_a="sym")))
        rows.append({
            "direction": k,
            "fd": fd,
            "predicted": predicted,
            "rel_mismatch": abs(fd - predicted) / abs(predicted),
        })
    return rows


def naive_dual_curvature(params: ModelParams, grid: Grid, u, eps: float | None = None,
                         margin: float = 1e-8) -> NaiveDualDiagnostic:
    """Spectrum of ``L + 2 v0* - eps`` at ``v0* = alpha (u^2 - beta)``, the
    operator dividing the non-proximal dual functional."""
    u = as_field(grid, u, "u")
    eps = params.eps if eps is None else eps
    v0 = params.alpha * (u * u - params.beta)
    op = add_diag(laplacian(params, grid), 2.0 * v0 - eps)
    lo, hi = min_eig(op), max_eig(op)
    m = margin * max(1.0, abs(lo), abs(hi))
    if abs(lo) <= m or abs(hi) <= m:
        status = "degenerate"
    elif lo > 0:
        status = "positive-definite"
    elif hi < 0:
        status = "negative-definite"
    else:
        status = "indefinite"
    return NaiveDualDiagnostic(lo, hi, status)


# --- end-to-end verification --------------------------------------------------

def verify_thm1(params: ModelParams, grid: Grid, u0, ndirs: int = 5, seed: int = 0,
                radius: float | None = None) -> Report:
    """Zero gap, dual stationarity and the curvature claims at a critical point."""
    u0 = as_field(grid, u0, "u0")
    residual = _require_critical(params, grid, u0)
    report = Report("verify-thm1")
    cp = critical_point(params, grid, u0)
    t = build_dual_triple(params, grid, u0)
    J = energy_J(params, grid, u0)
    margin = bstar_margin(params, grid, t.v0star)
    diag = naive_dual_curvature(params, grid, u0)
    report.scalars.update({
        "J_u0": J,
        "grad_J_norm": residual,
        "classification": cp.classification.value,
        "hess_min_eig": cp.min_eig_hess,
        "hess_max_eig": cp.max_eig_hess,
        "bstar_margin": margin,
        "naive_dual_min_eig": diag.min_eig,
        "naive_dual_max_eig": diag.max_eig,
        "naive_dual_status": diag.status,
    })
    report.flag("triple_in_Bstar", margin > GT_MARGIN, margin - GT_MARGIN,
                "min_eig(L + 2 v0 + K + eps) - K/2")
    if not margin > GT_MARGIN:
        return report
    Jstar = eval_Jstar(params, grid, t)
    gap = abs(J - Jstar)
    gv, g0, gp = grad_Jstar(params, grid, t)
    dual_grad = float(np.linalg.norm(np.concatenate([gv, g0, gp])))
    report.scalars.update({"Jstar": Jstar, "gap": gap, "dual_grad_norm": dual_grad})
    report.check("zero_gap", gap, "<=", 1e-9 * (1.0 + abs(J)))
    report.check("dual_stationarity", dual_grad, "<=", 1e-8)

    cls = cp.classification
    if cls in (Classification.LOCAL_MIN, Classification.LOCAL_MAX):
        sense = "inf" if cls is Classification.LOCAL_MIN else "sup"
        label = "J3" if sense == "inf" else "J5"
        rows = d2_J3_check(params, grid, u0, ndirs=ndirs, seed=seed, radius=radius, sense=sense)
        table = Table(["direction", "fd", "predicted", "rel_mismatch", "interior"])
        for r in rows:
            table.add(**r)
        report.tables[f"{label}_curvature"] = table
        report.check(f"{label}_curvature_match", max(r["rel_mismatch"] for r in rows), "<=", 5e-3)
        report.check(f"{label}_curvature_positive", min(r["fd"] for r in rows), ">", 0.0)
        report.flag(f"{label}_optimum_interior", all(r["interior"] for r in rows),
                    1.0 if all(r["interior"] for r in rows) else -1.0)

        prow = d2_J8_p_check(params, grid, u0, ndirs=ndirs, seed=seed + 1)
        ptable = Table(["direction", "fd", "predicted", "rel_mismatch"])
        for r in prow:
            ptable.add(**r)
        report.tables["J8_p_curvature"] = ptable
        report.check("J8_p_curvature_match", max(r["rel_mismatch"] for r in prow), "<=", 1e-3)
        if sense == "inf":
            report.check("J8_p_curvature_sign", min(r["fd"] for r in prow), ">", 0.0)
        else:
            report.check("J8_p_curvature_sign", max(r["fd"] for r in prow), "<", 0.0)
    else:
        report.scalars["curvature_checks"] = "skipped: critical point is " + cls.value
    return report
