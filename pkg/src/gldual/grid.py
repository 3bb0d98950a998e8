"""Rectangular Dirichlet grids, quadrature and the discrete negative Laplacian.

Fields are plain 1-D float arrays holding one value per interior node in
lexicographic (C) order, last axis fastest.  Every integral is the interior
rectangle rule ``h**d * sum(values)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, InvalidGrid, InvalidParameter

__all__ = [
    "GridSpec",
    "Grid",
    "build_grid",
    "as_field",
    "integrate",
    "inner",
    "assemble_neg_laplacian",
    "w1inf_norm",
]


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    extent: float
    nodes_per_axis: int


@dataclass(frozen=True)
class Grid:
    spec: GridSpec
    h: float
    N: int
    weight: float

    @property
    def dim(self) -> int:
        return self.spec.dimension

    @property
    def n(self) -> int:
        return self.spec.nodes_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    def coordinates(self) -> list[np.ndarray]:
        """Nodal coordinates per axis, each flattened to a Field."""
        x = self.h * np.arange(1, self.n + 1)
        mesh = np.meshgrid(*([x] * self.dim), indexing="ij")
        return [m.ravel() for m in mesh]


def build_grid(spec: GridSpec) -> Grid:
    if spec.dimension not in (1, 2, 3):
        raise InvalidGrid(f"dimension must be 1, 2 or 3, got {spec.dimension}")
    if int(spec.nodes_per_axis) != spec.nodes_per_axis or spec.nodes_per_axis < 1:
        raise InvalidGrid(f"nodes_per_axis must be a positive integer, got {spec.nodes_per_axis}")
    if not (spec.extent > 0 and math.isfinite(spec.extent)):
        raise InvalidGrid(f"extent must be positive, got {spec.extent}")
    h = spec.extent / (spec.nodes_per_axis + 1)
    return Grid(spec=spec, h=h, N=spec.nodes_per_axis**spec.dimension, weight=h**spec.dimension)


def as_field(grid: Grid, values, name: str = "field") -> np.ndarray:
    """Validate ``values`` as a Field on ``grid`` and return it as float64."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != grid.N:
        raise DimensionMismatch(f"{name} has shape {arr.shape}, grid expects ({grid.N},)")
    return arr


def integrate(grid: Grid, g) -> float:
    g = as_field(grid, g)
    # Correctly rounded sum: independent of summation order and reproducible.
    return grid.weight * math.fsum(g)


def inner(grid: Grid, a, b) -> float:
    a = as_field(grid, a, "a")
    b = as_field(grid, b, "b")
    return integrate(grid, a * b)


def _second_difference(n: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


@functools.lru_cache(maxsize=64)
def _laplacian_matrix(grid: Grid, gamma: float) -> sp.csr_matrix:
    n, d = grid.n, grid.dim
    t = _second_difference(n)
    eye = sp.identity(n, format="csr")
    mat = sp.csr_matrix((grid.N, grid.N))
    for axis in range(d):
        factors = [t if k == axis else eye for k in range(d)]
        term = factors[0]
        for fac in factors[1:]:
            term = sp.kron(term, fac, format="csr")
        mat = mat + term
    mat = (gamma / grid.h**2) * mat
    mat.sort_indices()
    mat.data.setflags(write=False)
    return mat


def assemble_neg_laplacian(grid: Grid, gamma: float):
    """The (2d+1)-point stencil of ``-gamma * Laplacian`` with Dirichlet truncation."""
    from .linalg import SymOp

    if not gamma > 0:
        raise InvalidParameter(f"gamma must be positive, got {gamma}")
    return SymOp(_laplacian_matrix(grid, float(gamma)))


def w1inf_norm(grid: Grid, u) -> float:
    """max(|u|_inf, max forward-difference slope) with zero ghost values."""
    u = as_field(grid, u, "u")
    if grid.N == 0:
        return 0.0
    arr = u.reshape(grid.shape)
    best = float(np.max(np.abs(arr)))
    for axis in range(grid.dim):
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 1)
        padded = np.pad(arr, pad)
        slope = np.max(np.abs(np.diff(padded, axis=axis))) / grid.h
        best = max(best, float(slope))
    return best
