"""Scenario dispatch: turn a parsed config into a Report."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .config import Scenario
from .errors import GLDualError
from .model import energy_J
from .optcrit import verify_thm2, verify_thm3
from .primal import convexity_K, newton
from .proxdual import naive_dual_curvature, verify_thm1
from .report import Report, Table
from .tensordual import KMat, tensor_from_u, verify_thm4

__all__ = ["run_scenario", "thread_count", "THREADS_ENV"]

THREADS_ENV = "GLDUAL_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _primal(s: Scenario, grid):
    return newton(s.params, grid, s.init, tol=s.tol, maxit=s.maxit)


def _solve_primal(s, grid) -> Report:
    r = Report("solve-primal")
    cp = _primal(s, grid)
    r.scalars.update({
        "J_u0": energy_J(s.params, grid, cp.u0),
        "grad_J_norm": cp.residual_norm,
        "classification": cp.classification.value,
        "hess_min_eig": cp.min_eig_hess,
        "hess_max_eig": cp.max_eig_hess,
        "convexity_K": convexity_K(s.params, grid, cp.u0),
        "iterations": cp.iterations,
    })
    table = Table(["node", "u0"])
    for i, x in enumerate(cp.u0):
        table.add(node=i, u0=float(x))
    r.tables["solution"] = table
    r.check("grad_J_norm", cp.residual_norm, "<=", s.tol)
    return r


def _verify_thm1(s, grid) -> Report:
    cp = _primal(s, grid)
    return verify_thm1(s.params, grid, cp.u0, ndirs=s.ndirs, seed=s.seed, radius=s.radius)


def _verify_thm2(s, grid) -> Report:
    return verify_thm2(s.params, grid, nsamples=s.nsamples, npairs=s.npairs, seed=s.seed)


def _verify_thm3(s, grid) -> Report:
    cp = _primal(s, grid)
    return verify_thm3(s.params, grid, cp.u0, nsamples=s.nsamples, seed=s.seed)


def _verify_thm4(s, grid) -> Report:
    km = KMat(s.params.K, s.params.K12)
    init = tensor_from_u(s.params, grid, km, s.init)
    return verify_thm4(s.params, grid, km, tol=s.tol, maxit=s.maxit,
                       nsamples=min(s.nsamples, 50), ndirs=max(s.ndirs, 10), seed=s.seed, init=init)


def _naive_dual_diag(s, grid) -> Report:
    """Spectrum of the non-proximal denominator at ``init`` and at the critical
    point, then the proximal check at the same point when K is large enough."""
    r = Report("naive-dual-diag")
    at_init = naive_dual_curvature(s.params, grid, s.init)
    cp = _primal(s, grid)
    at_cp = naive_dual_curvature(s.params, grid, cp.u0)
    kc = convexity_K(s.params, grid, cp.u0)
    r.scalars.update({
        "init_naive_min_eig": at_init.min_eig, "init_naive_max_eig": at_init.max_eig,
        "init_naive_status": at_init.status,
        "critical_naive_min_eig": at_cp.min_eig, "critical_naive_max_eig": at_cp.max_eig,
        "critical_naive_status": at_cp.status,
        "classification": cp.classification.value, "convexity_K": kc, "K": s.params.K,
    })
    r.flag("naive_denominator_indefinite", at_init.indefinite or at_cp.indefinite,
           max(min(-d.min_eig, d.max_eig) for d in (at_init, at_cp)),
           "min(-lambda_min, lambda_max) of L + 2 v0* - eps; positive means indefinite")
    if s.params.K >= kc:
        r.merge(verify_thm1(s.params, grid, cp.u0, ndirs=s.ndirs, seed=s.seed, radius=s.radius),
                prefix="proximal.")
    else:
        r.scalars["proximal"] = f"skipped: K below convexity_K = {kc:.6g}"
    return r


def _sweep_point(s: Scenario, value: float) -> dict:
    params = s.params.replace(**{s.sweep_param: value})
    point = run_scenario(replace(s, task=s.sweep_task, params=params))
    sc = point.scalars
    return {
        s.sweep_param: value,
        "passed": point.passed,
        "J_u0": sc.get("J_u0"),
        "gap": sc.get("gap"),
        "bstar_margin": sc.get("bstar_margin"),
        "in_Bstar": None if sc.get("bstar_margin") is None else sc["bstar_margin"] > 1e-10,
        "dual_grad_norm": sc.get("dual_grad_norm"),
        "classification": sc.get("classification"),
        "errors": "; ".join(point.errors),
        "_report": point,
    }


def _sweep(s, grid) -> Report:
    r = Report("sweep")
    columns = [s.sweep_param, "passed", "J_u0", "gap", "bstar_margin", "in_Bstar",
               "dual_grad_norm", "classification", "errors"]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        rows = list(pool.map(lambda v: _sweep_point(s, v), s.sweep_values))
    table = Table(columns)
    r.tables["sweep"] = table  # first, so CSV export picks it by default
    for row in rows:
        point = row.pop("_report")
        table.add(**row)
        r.merge(point, prefix=f"{s.sweep_param}={format(row[s.sweep_param], 'g')}.")
    r.scalars["sweep_param"] = s.sweep_param
    r.scalars["sweep_task"] = s.sweep_task
    r.scalars["points"] = len(rows)
    return r


DISPATCH = {
    "solve-primal": _solve_primal,
    "verify-thm1": _verify_thm1,
    "verify-thm2": _verify_thm2,
    "verify-thm3": _verify_thm3,
    "verify-thm4": _verify_thm4,
    "naive-dual-diag": _naive_dual_diag,
    "sweep": _sweep,
}


def run_scenario(s: Scenario) -> Report:
    """Run ``s.task``.  Library errors become failed verdicts carrying the message."""
    grid = s.build_grid()
    try:
        report = DISPATCH[s.task](s, grid)
    except (GLDualError, np.linalg.LinAlgError) as exc:
        report = Report(s.task)
        msg = f"{type(exc).__name__}: {exc}"
        report.errors.append(msg)
        residual = getattr(exc, "residual", None)
        report.flag("completed", False, math.nan if residual is None else -float(residual), msg)
    report.scenario = s.echo()
    return report
