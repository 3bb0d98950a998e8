"""Ginzburg-Landau energy, its proximal augmentation, gradient and Hessian.

The gradient term is the quadratic form of the stencil operator,
``1/2 <L u, u>`` with ``L = -gamma * Laplacian``, so ``grad_J`` and ``hess_J``
are its exact derivatives.  Gradients are nodal (L2 Riesz) representatives:
the directional derivative of ``J`` along ``d`` is ``inner(grid, grad_J(u), d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter
from .grid import Grid, as_field, assemble_neg_laplacian, inner, integrate
from .linalg import SymOp, add_diag, apply

__all__ = ["ModelParams", "energy_J", "energy_Jhat", "grad_J", "hess_J", "laplacian"]


@dataclass(frozen=True, eq=False)
class ModelParams:
    gamma: float
    alpha: float
    beta: float
    K: float
    eps: float
    f: np.ndarray
    K12: float = 10.0

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta", "K", "eps", "K12"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameter(f"{name} must be a positive finite number, got {value}")
        f = np.array(self.f, dtype=float)
        if f.ndim != 1 or not np.all(np.isfinite(f)):
            raise InvalidParameter("f must be a finite 1-D field")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    def replace(self, **changes) -> "ModelParams":
        values = {k: getattr(self, k) for k in ("gamma", "alpha", "beta", "K", "eps", "f", "K12")}
        values.update(changes)
        return ModelParams(**values)


def laplacian(params: ModelParams, grid: Grid) -> SymOp:
    return assemble_neg_laplacian(grid, params.gamma)


def _f(params: ModelParams, grid: Grid) -> np.ndarray:
    return as_field(grid, params.f, "f")


def energy_J(params: ModelParams, grid: Grid, u) -> float:
    u = as_field(grid, u, "u")
    L = laplacian(params, grid)
    gradient_term = 0.5 * inner(grid, apply(L, u), u)
    well = 0.5 * params.alpha * integrate(grid, (u * u - params.beta) ** 2)
    return gradient_term + well - inner(grid, u, _f(params, grid))


def energy_Jhat(params: ModelParams, grid: Grid, u, p) -> float:
    u = as_field(grid, u, "u")
    p = as_field(grid, p, "p")
    return energy_J(params, grid, u) + 0.5 * params.K * integrate(grid, (u - p) ** 2)


def grad_J(params: ModelParams, grid: Grid, u) -> np.ndarray:
    u = as_field(grid, u, "u")
    L = laplacian(params, grid)
    return apply(L, u) + 2.0 * params.alpha * (u * u - params.beta) * u - _f(params, grid)


def hess_J(params: ModelParams, grid: Grid, u) -> SymOp:
    """Second variation ``L + diag(6 alpha u^2 - 2 alpha beta)``."""
    u = as_field(grid, u, "u")
    a = params.alpha
    return add_diag(laplacian(params, grid), 6.0 * a * u * u - 2.0 * a * params.beta)
