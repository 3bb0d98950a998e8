import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gldual.errors import DimensionMismatch, InvalidGrid, InvalidParameter
from gldual.grid import GridSpec, assemble_neg_laplacian, build_grid, inner, integrate, w1inf_norm
from gldual.linalg import apply, min_eig

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize("dim,nodes,h,N,weight", [
    (1, 3, 0.25, 3, 0.25),
    (2, 3, 0.25, 9, 0.0625),
    (3, 3, 0.25, 27, 0.015625),
])
def test_build_grid(dim, nodes, h, N, weight):
    g = build_grid(GridSpec(dim, 1.0, nodes))
    assert g.h == h and g.N == N and g.weight == weight


@pytest.mark.parametrize("spec", [GridSpec(1, 1.0, 0), GridSpec(4, 1.0, 3), GridSpec(0, 1.0, 3),
                                  GridSpec(1, -1.0, 3), GridSpec(1, 1.0, 2.5)])
def test_build_grid_rejects(spec):
    with pytest.raises(InvalidGrid):
        build_grid(spec)


@pytest.mark.parametrize("g,expected", [((1, 1, 1), 0.75), ((0, 0, 0), 0.0), ((2, -1, 3), 1.0)])
def test_integrate(g3, g, expected):
    assert integrate(g3, g) == expected


@pytest.mark.parametrize("a,b,expected", [
    ((1, 1, 1), (1, 1, 1), 0.75),
    ((1, 0, 0), (0, 1, 0), 0.0),
    ((2, 2, 2), (1, 1, 1), 1.5),
])
def test_inner(g3, a, b, expected):
    assert inner(g3, a, b) == expected


def test_length_mismatch(g3):
    with pytest.raises(DimensionMismatch):
        integrate(g3, [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        inner(g3, [1.0, 2.0, 3.0], [1.0])


def test_laplacian_stencil(g3):
    L = assemble_neg_laplacian(g3, 1.0)
    np.testing.assert_array_equal(apply(L, [1.0, 1.0, 1.0]), [16.0, 0.0, 16.0])
    np.testing.assert_array_equal(L.dense, [[32, -16, 0], [-16, 32, -16], [0, -16, 32]])
    assert min_eig(L) == pytest.approx(32 - 16 * math.sqrt(2), abs=1e-10)


def test_laplacian_2d_stencil():
    g = build_grid(GridSpec(2, 1.0, 3))
    L = assemble_neg_laplacian(g, 2.0)
    assert np.all(L.diagonal() == 2.0 * 4 / g.h ** 2)
    centre = 4  # middle node has four neighbours
    row = L.dense[centre]
    assert sorted(row[row != 0]) == [-32.0] * 4 + [128.0]


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_laplacian_rejects_gamma(g3, gamma):
    with pytest.raises(InvalidParameter):
        assemble_neg_laplacian(g3, gamma)


@pytest.mark.parametrize("u,expected", [((0, 0, 0), 0.0), ((1, 1, 1), 4.0), ((0.5, 0.25, 0), 2.0)])
def test_w1inf_norm(g3, u, expected):
    assert w1inf_norm(g3, u) == expected


@given(arrays(float, 5, elements=finite), arrays(float, 5, elements=finite))
def test_integrate_additive_and_inner_symmetric(a, b):
    g = build_grid(GridSpec(1, 2.0, 5))
    assert integrate(g, a + b) == pytest.approx(integrate(g, a) + integrate(g, b), rel=1e-12, abs=1e-9)
    assert inner(g, a, b) == inner(g, b, a)


@pytest.mark.parametrize("dim,nodes", [(1, 17), (2, 6), (3, 4)])
def test_laplacian_symmetric_and_positive(dim, nodes, rng):
    g = build_grid(GridSpec(dim, 1.5, nodes))
    L = assemble_neg_laplacian(g, 0.3)
    for _ in range(100):
        a, b = rng.standard_normal((2, g.N))
        lhs, rhs = inner(g, apply(L, a), b), inner(g, a, apply(L, b))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
    assert min_eig(L) > 0


@given(st.integers(1, 3), st.integers(1, 6), st.floats(0.1, 10.0))
def test_min_eig_positive_any_grid(dim, nodes, extent):
    g = build_grid(GridSpec(dim, extent, nodes))
    assert min_eig(assemble_neg_laplacian(g, 1.0)) > 0
