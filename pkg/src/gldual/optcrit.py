"""Sign alignment with f, the sets A+ and B+, the operator H(u), a sampled
convexity probe for A+ n B+, and the related duality principle whose
conjugate is computed numerically."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    HypothesisViolated,
    MixedSignF,
    NoConvergence,
    NotConcave,
    NotPositiveDefinite,
    PreconditionError,
)
from .grid import Grid, as_field, inner, integrate
from .linalg import SymOp, add_diag, apply, max_eig, min_eig, solve_spd, sqrt_spd
from .model import ModelParams, energy_J, grad_J, hess_J, laplacian
from .primal import newton
from .proxdual import bstar_margin, build_dual_triple, eval_Fstar, eval_H
from .report import Report, Table

__all__ = [
    "MembershipReport",
    "sign_align",
    "in_Aplus",
    "in_Bplus",
    "membership",
    "H_operator",
    "random_aligned_field",
    "convexity_probe",
    "numeric_Gstar_thm3",
    "eval_Jstar_thm3",
    "verify_thm2",
    "verify_thm3",
]

APLUS_MARGIN = 1e-12
BPLUS_MARGIN = 1e-8
LAMBDAS = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass(frozen=True)
class MembershipReport:
    in_Aplus: bool
    in_Bplus: bool
    min_eig_hess: float
    sign_violations: int


def _uniform_sign(f: np.ndarray) -> int:
    pos, neg = bool(np.any(f > 0)), bool(np.any(f < 0))
    if pos and neg:
        raise MixedSignF("f takes both strictly positive and strictly negative values")
    return -1 if neg else 1


def sign_align(grid: Grid, u, f) -> np.ndarray:
    """Flip ``u`` at the nodes where ``u f < 0``.

    For f of one strict sign the result is ``sign(f) |u|`` and ``J`` cannot
    increase: the stencil form only sees ``||a| - |b|| <= |a - b|``.
    """
    u = as_field(grid, u, "u")
    f = as_field(grid, f, "f")
    _uniform_sign(f)
    return np.where(u * f >= 0, u, -u)


def in_Aplus(grid: Grid, u, f) -> bool:
    u = as_field(grid, u, "u")
    f = as_field(grid, f, "f")
    return bool(np.all(u * f >= -APLUS_MARGIN))


def _bplus_margin(params, grid, u):
    H = hess_J(params, grid, u)
    lo, hi = min_eig(H), max_eig(H)
    return lo, lo + BPLUS_MARGIN * max(1.0, abs(lo), abs(hi))


def in_Bplus(params: ModelParams, grid: Grid, u) -> bool:
    return _bplus_margin(params, grid, u)[1] >= 0


def membership(params: ModelParams, grid: Grid, u) -> MembershipReport:
    u = as_field(grid, u, "u")
    lo, slack = _bplus_margin(params, grid, u)
    violations = int(np.count_nonzero(u * params.f < -APLUS_MARGIN))
    return MembershipReport(violations == 0, slack >= 0, lo, violations)


def _hypothesis_gap(params, grid) -> float:
    """``2 alpha beta - max_eig(L)``; non-negative when ``-L - 2 alpha beta <= 0``."""
    return 2.0 * params.alpha * params.beta - max_eig(laplacian(params, grid))


def H_operator(params: ModelParams, grid: Grid, u) -> SymOp:
    """``sqrt(6 alpha) |u| - sqrt(2 alpha beta - L)``."""
    u = as_field(grid, u, "u")
    gap = _hypothesis_gap(params, grid)
    if gap < 0:
        raise HypothesisViolated(f"max_eig(L) exceeds 2*alpha*beta by {-gap:.6g}")
    L = laplacian(params, grid)
    root = sqrt_spd(add_diag(SymOp(-L.dense), 2.0 * params.alpha * params.beta))
    return SymOp(-root.dense, np.sqrt(6.0 * params.alpha) * np.abs(u))


def _smooth(grid: Grid, rng: np.random.Generator, modes: int = 3) -> np.ndarray:
    coords = grid.coordinates()
    ext = grid.spec.extent
    out = np.zeros(grid.N)
    for _ in range(modes):
        k = rng.integers(1, 4, size=grid.dim)
        shape = np.ones(grid.N)
        for x, kk in zip(coords, k):
            shape = shape * np.sin(kk * np.pi * x / ext)
        out += rng.standard_normal() * shape
    return out


def random_aligned_field(params: ModelParams, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Smooth random field with ``|u|`` near ``sqrt(beta)`` times ``sign(f)``."""
    s = _uniform_sign(params.f)
    base = rng.uniform(0.5, 1.5) * np.sqrt(params.beta)
    u = np.abs(base + 0.2 * np.sqrt(params.beta) * _smooth(grid, rng))
    return s * u


def convexity_probe(params: ModelParams, grid: Grid, f=None, nsamples: int = 200,
                    seed: int = 0, max_tries: int = 50) -> Report:
    """Sample pairs in A+ n B+ and test the segment between them at
    lambda = 0.1, ..., 0.9.  Counterexamples are kept verbatim."""
    if f is not None:
        params = params.replace(f=as_field(grid, f, "f"))
    _uniform_sign(params.f)
    gap = _hypothesis_gap(params, grid)
    if gap < 0:
        raise PreconditionError(f"hypothesis max_eig(L) <= 2 alpha beta fails by {-gap:.6g}")
    rng = np.random.default_rng(seed)

    def draw():
        for _ in range(max_tries):
            u = random_aligned_field(params, grid, rng)
            if in_Bplus(params, grid, u):
                return u
        return None

    counter = Table(["pair", "lam", "min_eig_hess", "in_Aplus", "in_Bplus", "u1", "u2"])
    tested = passed = rejected = 0
    for k in range(nsamples):
        u1, u2 = draw(), draw()
        if u1 is None or u2 is None:
            rejected += 1
            continue
        for lam in LAMBDAS:
            u = lam * u1 + (1.0 - lam) * u2
            m = membership(params, grid, u)
            tested += 1
            if m.in_Aplus and m.in_Bplus:
                passed += 1
            else:
                counter.add(pair=k, lam=lam, min_eig_hess=m.min_eig_hess, in_Aplus=m.in_Aplus,
                            in_Bplus=m.in_Bplus, u1=" ".join(format(x, ".17g") for x in u1),
                            u2=" ".join(format(x, ".17g") for x in u2))
    report = Report("convexity-probe")
    report.scalars.update({
        "probe_pairs": nsamples - rejected,
        "probe_pairs_rejected": rejected,
        "probe_combinations": tested,
        "probe_passed": passed,
        "probe_failed": tested - passed,
    })
    report.tables["convexity_counterexamples"] = counter
    return report


def _check_concave(params):
    a, b = params.alpha, params.beta
    if not params.K + params.eps > 2.0 * a * b:
        raise NotConcave(f"K + eps = {params.K + params.eps:g} must exceed 2 alpha beta = {2 * a * b:g}")


def _q_value(params, grid, u):
    L = laplacian(params, grid)
    return (0.5 * inner(grid, apply(L, u), u)
            + 0.5 * params.alpha * integrate(grid, (u * u - params.beta) ** 2)
            + 0.5 * (params.K + params.eps) * integrate(grid, u * u))


def numeric_Gstar_thm3(params: ModelParams, grid: Grid, w, tol: float = 1e-11,
                       maxit: int = 100, u_init=None, return_argmax: bool = False):
    """``sup_u <u, w> - Q(u)`` with
    ``Q(u) = 1/2 <L u, u> + alpha/2 int (u^2 - beta)^2 + (K + eps)/2 int u^2``.

    ``w`` stands for ``v* + K p``.  Strict concavity (``K + eps > 2 alpha beta``)
    makes Newton with an Armijo search globally convergent.
    """
    _check_concave(params)
    w = as_field(grid, w, "w")
    a, b, c = params.alpha, params.beta, params.K + params.eps
    L = laplacian(params, grid)
    u = solve_spd(add_diag(L, c), w) if u_init is None else as_field(grid, u_init, "u_init").copy()

    def objective(x):
        return inner(grid, x, w) - _q_value(params, grid, x)

    def ascent(x):
        return w - apply(L, x) - 2.0 * a * (x * x - b) * x - c * x

    val, g = objective(u), ascent(u)
    for it in range(maxit):
        if float(np.linalg.norm(g)) <= tol * (1.0 + float(np.linalg.norm(w))):
            break
        H = add_diag(L, 6.0 * a * u * u - 2.0 * a * b + c)
        try:
            d = solve_spd(H, g)
        except NotPositiveDefinite:
            raise NotConcave("inner problem lost concavity") from None
        slope = grid.weight * float(g @ d)
        if slope <= 1e-14 * (1.0 + abs(val)):
            trial = u + d
            g_trial = ascent(trial)
            if np.linalg.norm(g_trial) >= np.linalg.norm(g):
                break
            u, g, val = trial, g_trial, objective(trial)
            continue
        step = 1.0
        for _ in range(40):
            trial = u + step * d
            v_trial = objective(trial)
            if v_trial >= val + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break
        u, val, g = trial, v_trial, ascent(trial)
    else:
        raise NoConvergence("numeric G* did not converge", best=u, residual=float(np.linalg.norm(g)))
    if float(np.linalg.norm(g)) > 1e-8 * (1.0 + float(np.linalg.norm(w))):
        raise NoConvergence("numeric G* stalled", best=u, residual=float(np.linalg.norm(g)))
    return (val, u) if return_argmax else val


def eval_Jstar_thm3(params: ModelParams, grid: Grid, vstar, p, u_init=None) -> float:
    vstar = as_field(grid, vstar, "vstar")
    p = as_field(grid, p, "p")
    g = numeric_Gstar_thm3(params, grid, vstar + params.K * p, u_init=u_init)
    return -g + eval_Fstar(params, grid, vstar) + eval_H(params, grid, p)


def verify_thm2(params: ModelParams, grid: Grid, nsamples: int = 1000, npairs: int = 200,
                seed: int = 0) -> Report:
    """Sign-alignment monotonicity plus the convexity probe.

    Only the monotonicity clause is a verdict; the probe tally is recorded.
    """
    report = Report("verify-thm2")
    s = _uniform_sign(params.f)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    scale = np.sqrt(params.beta)
    for _ in range(nsamples):
        u = rng.uniform(0.1, 2.0) * scale * rng.standard_normal(grid.N)
        worst = max(worst, energy_J(params, grid, sign_align(grid, u, params.f)) - energy_J(params, grid, u))
    report.scalars["sign_align_samples"] = nsamples
    report.scalars["f_sign"] = s
    if nsamples:
        report.check("sign_align_monotone", worst, "<=", 1e-12, "max J(sign_align(u)) - J(u)")
    gap = _hypothesis_gap(params, grid)
    report.scalars["hypothesis_gap"] = gap
    if gap < 0:
        report.scalars["convexity_probe"] = "skipped: max_eig(L) > 2 alpha beta"
        return report
    probe = convexity_probe(params, grid, nsamples=npairs, seed=seed + 1)
    report.merge(probe)
    # Compare the two memberships the criterion declares equivalent.
    agree = total = 0
    for _ in range(min(npairs, 50)):
        u = random_aligned_field(params, grid, rng) * rng.uniform(0.3, 1.2)
        total += 1
        agree += in_Bplus(params, grid, u) == (min_eig(H_operator(params, grid, u)) >= -BPLUS_MARGIN)
    report.scalars["H_equivalence_agree"] = agree
    report.scalars["H_equivalence_total"] = total
    return report


def verify_thm3(params: ModelParams, grid: Grid, u0, nsamples: int = 200, seed: int = 0) -> Report:
    """Gap at the constructed dual pair, weak duality on random dual pairs,
    and sign-alignment consistency."""
    u0 = as_field(grid, u0, "u0")
    res = float(np.linalg.norm(grad_J(params, grid, u0)))
    if res > 1e-8:
        raise PreconditionError(f"u0 is not critical: residual {res:.3e}")
    s = _uniform_sign(params.f)
    gap_h = _hypothesis_gap(params, grid)
    if gap_h < 0:
        raise PreconditionError(f"hypothesis max_eig(L) <= 2 alpha beta fails by {-gap_h:.6g}")
    _check_concave(params)
    m = membership(params, grid, u0)
    if not m.in_Aplus:
        raise PreconditionError(f"u0 is not in A+ ({m.sign_violations} sign violations)")
    if not m.in_Bplus:
        raise PreconditionError(f"u0 is not in B+ (min eig {m.min_eig_hess:.3e})")

    report = Report("verify-thm3")
    t = build_dual_triple(params, grid, u0)
    J0 = energy_J(params, grid, u0)
    Jstar = eval_Jstar_thm3(params, grid, t.vstar, t.p, u_init=u0)
    bmargin = bstar_margin(params, grid, t.v0star)
    report.scalars.update({
        "J_u0": J0, "Jstar_hat": Jstar, "gap": abs(J0 - Jstar), "grad_J_norm": res,
        "in_Aplus": m.in_Aplus, "in_Bplus": m.in_Bplus, "hess_min_eig": m.min_eig_hess,
        "bstar_margin": bmargin, "hypothesis_gap": gap_h,
    })
    report.check("gap", abs(J0 - Jstar), "<=", 1e-7)
    report.flag("v0hat_in_Bstar", bmargin > 1e-10, bmargin - 1e-10)
    if nsamples <= 0:
        return report

    rng = np.random.default_rng(seed)
    best = J0
    for _ in range(max(4, nsamples // 10)):
        start = random_aligned_field(params, grid, rng) * rng.choice([-1.0, 1.0])
        try:
            cp = newton(params, grid, start, tol=1e-10, maxit=100)
        except NoConvergence:
            continue
        best = min(best, energy_J(params, grid, cp.u0))
    report.scalars["best_primal"] = best
    report.check("u0_attains_best_primal", J0 - best, "<=", 1e-8 * (1.0 + abs(J0)))

    worst = np.inf
    for _ in range(nsamples):
        sigma = 10.0 ** rng.uniform(-3, 0)
        vstar = t.vstar + sigma * (1.0 + np.max(np.abs(t.vstar))) * rng.standard_normal(grid.N)
        p = t.p + sigma * (1.0 + np.max(np.abs(t.p))) * rng.standard_normal(grid.N)
        worst = min(worst, eval_Jstar_thm3(params, grid, vstar, p) - best)
    report.check("weak_duality", worst, ">=", -1e-8, "min over samples of J*(v*,p) - best primal")

    incr = -np.inf
    for _ in range(nsamples):
        u = rng.uniform(0.1, 2.0) * np.sqrt(params.beta) * rng.standard_normal(grid.N)
        incr = max(incr, energy_J(params, grid, sign_align(grid, u, params.f)) - energy_J(params, grid, u))
    report.check("sign_align_monotone", incr, "<=", 1e-12)
    report.scalars["f_sign"] = s
    return report
