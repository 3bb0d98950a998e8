"""Convex dual formulation with tensor-indexed dual variables.

The primal field is split as ``u_i u_j`` with a 2x2 coupling matrix
``K_ij`` (``K_11 = K_22 = K``, ``K_12 = K_21``).  Dual variables are the
pair ``v* = (v1, v2)`` and the symmetric tensor ``v0* = (s11, s12, s22)``.
At each node the conjugate involves the inverse of

    M = [[2 s11 - K, 2 s12 - K12], [2 s12 - K12, 2 s22 - K]].
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidParameter, NoConvergence, NotInBstarT, SingularNode
from .grid import Grid, as_field, inner, integrate, w1inf_norm
from .linalg import add_diag, apply, solve_spd
from .model import ModelParams, energy_J, grad_J, laplacian
from .primal import newton
from .report import Report

__all__ = [
    "KMat",
    "TensorDual",
    "nodewise_inverse",
    "eval_Gstar_t",
    "eval_Fstar_t",
    "eval_Jstar_t",
    "in_Bstar_t",
    "in_Dstar",
    "in_Uhat",
    "in_Cstar",
    "cstar_min_eig",
    "stationarity_residual_t",
    "saddle_solve",
    "reconstruct_u",
    "tensor_from_u",
    "verify_thm4",
]

SINGULAR_RTOL = 1e-10
CSTAR_MARGIN = 1e-10
CSTAR_DENSE_LIMIT = 500


@dataclass(frozen=True)
class KMat:
    K: float
    K12: float

    def __post_init__(self):
        if not (self.K > 0 and self.K12 > 0):
            raise InvalidParameter("K and K12 must be positive")

    @property
    def total(self) -> float:
        """``sum_ij K_ij``."""
        return 2.0 * self.K + 2.0 * self.K12

    def separated(self, ratio: float = 10.0, floor: float = 10.0) -> bool:
        """``K >> K12 >> 1`` read as ``K >= ratio K12`` and ``K12 >= floor``."""
        return self.K >= ratio * self.K12 and self.K12 >= floor


@dataclass(frozen=True, eq=False)
class TensorDual:
    v1: np.ndarray
    v2: np.ndarray
    s11: np.ndarray
    s12: np.ndarray
    s22: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "TensorDual":
        return cls(*(np.zeros(n) for _ in range(5)))

    @classmethod
    def from_stack(cls, x: np.ndarray) -> "TensorDual":
        return cls(*np.split(np.asarray(x, dtype=float), 5))

    def stack(self) -> np.ndarray:
        return np.concatenate([self.v1, self.v2, self.s11, self.s12, self.s22])

    def checked(self, grid: Grid) -> "TensorDual":
        return TensorDual(*(as_field(grid, getattr(self, f.name), f.name) for f in fields(self)))


def nodewise_inverse(km: KMat, t: TensorDual):
    """Per-node inverse ``(a, b, c)`` of ``M`` as ``[[a, b], [b, c]]``."""
    m11 = 2.0 * np.asarray(t.s11) - km.K
    m12 = 2.0 * np.asarray(t.s12) - km.K12
    m22 = 2.0 * np.asarray(t.s22) - km.K
    det = m11 * m22 - m12 * m12
    bad = np.flatnonzero(np.abs(det) < SINGULAR_RTOL * km.K ** 2)
    if bad.size:
        i = int(bad[0])
        raise SingularNode(i, float(det[i]))
    return m22 / det, -m12 / det, m11 / det


def in_Bstar_t(t: TensorDual, km: KMat) -> bool:
    bound = km.K12 / 4.0
    return all(float(np.max(np.abs(s), initial=0.0)) <= bound for s in (t.s11, t.s12, t.s22))


def in_Dstar(t: TensorDual, km: KMat, alpha: float) -> bool:
    c = (km.K / 2.0) ** 3
    return all(-128.0 * float(np.max(np.abs(v), initial=0.0)) ** 2 / c + 1.0 / alpha > 0
               for v in (t.v1, t.v2))


def in_Uhat(grid: Grid, u, km: KMat) -> bool:
    return w1inf_norm(grid, u) < km.K ** 0.25


def _gstar_raw(params, grid, km, t):
    a, b, c = nodewise_inverse(km, t)
    quad = a * t.v1 * t.v1 + 2.0 * b * t.v1 * t.v2 + c * t.v2 * t.v2
    sq = t.s11 ** 2 + 2.0 * t.s12 ** 2 + t.s22 ** 2
    lin = t.s11 + 2.0 * t.s12 + t.s22
    return (-0.5 * integrate(grid, quad) - (2.0 / params.alpha) * integrate(grid, sq)
            - params.beta * integrate(grid, lin))


def eval_Gstar_t(params: ModelParams, grid: Grid, km: KMat, t: TensorDual) -> float:
    t = t.checked(grid)
    if not in_Bstar_t(t, km):
        raise NotInBstarT(f"some |s_ij| exceeds K12/4 = {km.K12 / 4:g}")
    return _gstar_raw(params, grid, km, t)


def _fstar_operator(params, grid, km):
    return add_diag(laplacian(params, grid), km.total)


def reconstruct_u(params: ModelParams, grid: Grid, km: KMat, t: TensorDual) -> np.ndarray:
    """``(L + sum K_ij)^{-1} (v1 + v2 + f)``."""
    t = t.checked(grid)
    return solve_spd(_fstar_operator(params, grid, km), t.v1 + t.v2 + params.f)


def eval_Fstar_t(params: ModelParams, grid: Grid, km: KMat, t: TensorDual) -> float:
    t = t.checked(grid)
    w = t.v1 + t.v2 + params.f
    return 0.5 * inner(grid, solve_spd(_fstar_operator(params, grid, km), w), w)


def eval_Jstar_t(params: ModelParams, grid: Grid, km: KMat, t: TensorDual) -> float:
    return -eval_Fstar_t(params, grid, km, t) + eval_Gstar_t(params, grid, km, t)


def _jstar_raw(params, grid, km, t):
    return -eval_Fstar_t(params, grid, km, t) + _gstar_raw(params, grid, km, t)


def cstar_min_eig(params: ModelParams, grid: Grid, km: KMat, t: TensorDual) -> float:
    """Smallest eigenvalue of the quadratic form defining C*.

    On ``(v1, v2)`` the form is ``-1/2 <P(v1+v2), v1+v2> - 1/2 sum v_i (M^-1)_ij v_j``
    with ``P = (L + sum K_ij)^{-1}``; quadrature weights are dropped.
    """
    t = t.checked(grid)
    a, b, c = nodewise_inverse(km, t)
    n = grid.N
    S = sp.bmat([[sp.diags(a), sp.diags(b)], [sp.diags(b), sp.diags(c)]], format="csr")
    F = _fstar_operator(params, grid, km)
    if n <= CSTAR_DENSE_LIMIT:
        P = sla.cho_solve(sla.cho_factor(F.dense), np.eye(n))
        Q = -0.5 * np.block([[P, P], [P, P]]) - 0.5 * S.toarray()
        return float(sla.eigvalsh(0.5 * (Q + Q.T))[0])
    solve = spla.factorized(F.matrix())

    def matvec(x):
        x = np.ravel(x)
        y = solve(x[:n] + x[n:])
        return -0.5 * np.concatenate([y, y]) - 0.5 * (S @ x)

    op = spla.LinearOperator((2 * n, 2 * n), matvec=matvec, dtype=float)
    return float(spla.eigsh(op, k=1, which="SA", tol=1e-10, return_eigenvectors=False)[0])


def in_Cstar(params: ModelParams, grid: Grid, km: KMat, t: TensorDual) -> bool:
    if not in_Bstar_t(t, km):
        raise NotInBstarT(f"some |s_ij| exceeds K12/4 = {km.K12 / 4:g}")
    return cstar_min_eig(params, grid, km, t) > CSTAR_MARGIN


def _residuals(params, km, t, u):
    a = params.alpha / 4.0 * (u * u - params.beta)
    return np.concatenate([
        t.v1 - (km.K + km.K12 - 2.0 * t.s11 - 2.0 * t.s12) * u,
        t.v2 - (km.K + km.K12 - 2.0 * t.s12 - 2.0 * t.s22) * u,
        t.s11 - a, t.s12 - a, t.s22 - a,
    ])


def stationarity_residual_t(params: ModelParams, grid: Grid, km: KMat, t: TensorDual) -> float:
    """Norm of the stationarity conditions with ``u`` reconstructed from ``t``."""
    t = t.checked(grid)
    u = reconstruct_u(params, grid, km, t)
    return float(np.linalg.norm(_residuals(params, km, t, u)))


def tensor_from_u(params: ModelParams, grid: Grid, km: KMat, u) -> TensorDual:
    """The dual point that stationarity associates with ``u``."""
    u = as_field(grid, u, "u")
    s = params.alpha / 4.0 * (u * u - params.beta)
    v = (km.K + km.K12 - params.alpha * (u * u - params.beta)) * u
    return TensorDual(v.copy(), v.copy(), s.copy(), s.copy(), s.copy())


def _augmented(params, grid, km, x):
    # Unknowns (u, v1, v2, s11, s12, s22); the first block is u = P(v1 + v2 + f).
    n = grid.N
    u = x[:n]
    t = TensorDual.from_stack(x[n:])
    F = _fstar_operator(params, grid, km)
    r0 = apply(F, u) - t.v1 - t.v2 - params.f
    return np.concatenate([r0, _residuals(params, km, t, u)])


def _augmented_jacobian(params, grid, km, x):
    n = grid.N
    u = x[:n]
    t = TensorDual.from_stack(x[n:])
    I = sp.identity(n, format="csr")
    D = sp.diags
    Z = None
    F = _fstar_operator(params, grid, km).matrix()
    du = -params.alpha / 2.0 * u
    rows = [
        [F, -I, -I, Z, Z, Z],
        [D(-(km.K + km.K12 - 2.0 * t.s11 - 2.0 * t.s12)), I, Z, D(2.0 * u), D(2.0 * u), Z],
        [D(-(km.K + km.K12 - 2.0 * t.s12 - 2.0 * t.s22)), Z, I, Z, D(2.0 * u), D(2.0 * u)],
        [D(du), Z, Z, I, Z, Z],
        [D(du), Z, Z, Z, I, Z],
        [D(du), Z, Z, Z, Z, I],
    ]
    return sp.bmat(rows, format="csc")


def _relax(params, grid, km, t, tol, maxit, omega=0.5):
    best, best_res = t, np.inf
    for _ in range(maxit):
        u = reconstruct_u(params, grid, km, t)
        target = tensor_from_u(params, grid, km, u)
        t = TensorDual.from_stack((1.0 - omega) * t.stack() + omega * target.stack())
        res = stationarity_residual_t(params, grid, km, t)
        if res < best_res:
            best, best_res = t, res
        if res <= tol:
            return t, res
        if not np.isfinite(res):
            break
    return best, best_res


def saddle_solve(params: ModelParams, grid: Grid, km: KMat, init: TensorDual | None = None,
                 tol: float = 1e-10, maxit: int = 200) -> TensorDual:
    """Stationary point of ``J*`` by damped Newton on the augmented system.

    If Newton stalls, an alternating update with relaxation 0.5 takes over.
    """
    init = TensorDual.zeros(grid.N) if init is None else init.checked(grid)
    nodewise_inverse(km, init)
    x = np.concatenate([reconstruct_u(params, grid, km, init), init.stack()])
    r = _augmented(params, grid, km, x)
    res = float(np.linalg.norm(r))
    for _ in range(maxit):
        if res <= tol:
            break
        try:
            d = spla.spsolve(_augmented_jacobian(params, grid, km, x), -r)
        except RuntimeError:
            break
        if not np.all(np.isfinite(d)):
            break
        step = 1.0
        for _ in range(40):
            trial = x + step * d
            r_trial = _augmented(params, grid, km, trial)
            res_trial = float(np.linalg.norm(r_trial))
            if res_trial <= (1.0 - 1e-4 * step) * res:
                break
            step *= 0.5
        else:
            break
        x, r, res = trial, r_trial, res_trial
    t = TensorDual.from_stack(x[grid.N:])
    final = stationarity_residual_t(params, grid, km, t)
    if final <= tol:
        return t
    t, final = _relax(params, grid, km, t, tol, maxit)
    if final <= tol:
        return t
    raise NoConvergence(f"saddle solve stalled at residual {final:.3e}", best=t, residual=final)


def _second_differences(params, grid, km, t, which, ndirs, rng, step):
    out = []
    base = t.stack()
    n = grid.N
    j0 = _jstar_raw(params, grid, km, t)
    for _ in range(ndirs):
        d = np.zeros(5 * n)
        block = slice(0, 2 * n) if which == "v" else slice(2 * n, 5 * n)
        d[block] = rng.standard_normal(block.stop - block.start)
        d /= np.linalg.norm(d)
        jp = _jstar_raw(params, grid, km, TensorDual.from_stack(base + step * d))
        jm = _jstar_raw(params, grid, km, TensorDual.from_stack(base - step * d))
        out.append((jp - 2.0 * j0 + jm) / step ** 2)
    return np.array(out)


def verify_thm4(params: ModelParams, grid: Grid, km: KMat, u0_hint=None, tol: float = 1e-10,
                maxit: int = 200, nsamples: int = 20, ndirs: int = 10, seed: int = 0,
                init: TensorDual | None = None) -> Report:
    """Solve for the saddle point, reconstruct ``u0`` and compare both sides.

    Memberships are reported as verdicts; the K-separation flag is only recorded.
    """
    report = Report("verify-thm4")
    if init is None and u0_hint is not None:
        init = tensor_from_u(params, grid, km, u0_hint)
    t = saddle_solve(params, grid, km, init, tol=tol, maxit=maxit)
    u0 = reconstruct_u(params, grid, km, t)
    J0 = energy_J(params, grid, u0)
    Jstar = _jstar_raw(params, grid, km, t)
    resid = stationarity_residual_t(params, grid, km, t)
    gnorm = float(np.linalg.norm(grad_J(params, grid, u0)))
    s_target = params.alpha / 4.0 * (u0 * u0 - params.beta)
    diag_err = max(float(np.max(np.abs(t.s11 - s_target))), float(np.max(np.abs(t.s22 - s_target))))
    bstar = in_Bstar_t(t, km)
    cmin = cstar_min_eig(params, grid, km, t)
    report.scalars.update({
        "K": km.K, "K12": km.K12, "K_separated": km.separated(),
        "J_u0": J0, "Jstar_hat": Jstar, "gap": abs(J0 - Jstar),
        "stationarity_residual": resid, "grad_J_norm": gnorm,
        "w1inf_u0": w1inf_norm(grid, u0), "uhat_bound": km.K ** 0.25,
        "cstar_min_eig": cmin,
        "max_abs_s": max(float(np.max(np.abs(s))) for s in (t.s11, t.s12, t.s22)),
        "max_abs_v": max(float(np.max(np.abs(v))) for v in (t.v1, t.v2)),
    })
    if u0_hint is not None:
        report.scalars["distance_to_hint"] = float(np.linalg.norm(u0 - as_field(grid, u0_hint, "u0_hint")))
    report.check("stationarity_residual", resid, "<=", max(tol, 1e-8))
    report.check("grad_J_norm", gnorm, "<=", 1e-6)
    report.check("gap", abs(J0 - Jstar), "<=", 1e-6)
    report.check("diagonal_equality", diag_err, "<=", 1e-8, "s11 = s22 = alpha/4 (u0^2 - beta)")
    vmax = report.scalars["max_abs_v"]
    report.flag("vstar_in_Dstar", in_Dstar(t, km, params.alpha),
                1.0 / params.alpha - 128.0 * vmax ** 2 / (km.K / 2.0) ** 3)
    report.flag("v0star_in_Bstar", bstar, km.K12 / 4.0 - report.scalars["max_abs_s"])
    report.flag("v0star_in_Cstar", bstar and cmin > CSTAR_MARGIN, cmin - CSTAR_MARGIN)
    report.flag("u0_in_Uhat", in_Uhat(grid, u0, km), km.K ** 0.25 - report.scalars["w1inf_u0"])

    rng = np.random.default_rng(seed)
    step = 1e-3 * (1.0 + float(np.linalg.norm(t.stack())))
    conv = _second_differences(params, grid, km, t, "v", ndirs, rng, step)
    conc = _second_differences(params, grid, km, t, "s", ndirs, rng, step)
    report.scalars["min_curvature_vstar"] = float(conv.min()) if ndirs else None
    report.scalars["max_curvature_v0star"] = float(conc.max()) if ndirs else None
    if ndirs:
        report.check("convex_in_vstar", float(conv.min()), ">=", -1e-6)
        report.check("concave_in_v0star", float(conc.max()), "<=", 1e-6)

    if nsamples > 0:
        best, found = J0, 0
        scale = max(1.0, float(np.max(np.abs(u0))))
        for _ in range(nsamples):
            start = u0 + scale * rng.standard_normal(grid.N)
            try:
                cp = newton(params, grid, start, tol=1e-10, maxit=100)
            except NoConvergence:
                continue
            if in_Uhat(grid, cp.u0, km):
                found += 1
                best = min(best, energy_J(params, grid, cp.u0))
        report.scalars["multistart_in_Uhat"] = found
        report.scalars["best_primal_in_Uhat"] = best
        report.check("u0_attains_best_in_Uhat", J0 - best, "<=", 1e-8 * (1.0 + abs(J0)))
    return report
