import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from gldual.errors import DimensionMismatch, NotPositiveDefinite, NotPositiveSemidefinite
from gldual.grid import GridSpec, assemble_neg_laplacian, build_grid
from gldual.linalg import SymOp, add_diag, apply, matrix_gt, max_eig, min_eig, solve_spd, sqrt_spd

LMIN = 32 - 16 * math.sqrt(2)
LMAX = 32 + 16 * math.sqrt(2)


@pytest.fixture
def L(g3):
    return assemble_neg_laplacian(g3, 1.0)


def test_apply_examples(L):
    np.testing.assert_array_equal(apply(L, [1, 1, 1]), [16, 0, 16])
    np.testing.assert_array_equal(apply(add_diag(L, 8.1), [0, 0, 0]), [0, 0, 0])
    np.testing.assert_array_equal(apply(add_diag(L, 2.0), [0, 1, 0]), [-16, 34, -16])


def test_apply_dimension_mismatch(L):
    with pytest.raises(DimensionMismatch):
        apply(L, [1.0, 2.0])


def test_add_diag(L, rng):
    assert np.allclose(add_diag(L, 8.1).diagonal(), 40.1)
    np.testing.assert_array_equal(add_diag(L, [1, 2, 3]).diagonal(), [33, 34, 35])
    A0 = add_diag(L, 0.0)
    for _ in range(10):
        x = rng.standard_normal(3)
        np.testing.assert_array_equal(apply(A0, x), apply(L, x))


def test_solve_examples(L):
    np.testing.assert_array_equal(solve_spd(add_diag(L, 8.1), np.zeros(3)), np.zeros(3))
    np.testing.assert_allclose(solve_spd(L, [16, 0, 16]), [1, 1, 1], rtol=1e-12)
    with pytest.raises(NotPositiveDefinite):
        solve_spd(add_diag(L, -40.0), [1.0, 0.0, 0.0])


def test_eig_examples(L):
    assert min_eig(L) == pytest.approx(LMIN, abs=1e-10)
    assert max_eig(L) == pytest.approx(LMAX, abs=1e-10)
    assert min_eig(add_diag(L, -2.0)) == pytest.approx(LMIN - 2, abs=1e-10)
    D = SymOp(sp.csr_matrix((4, 4)), 5.0)
    assert min_eig(D) == max_eig(D) == 5.0


def test_matrix_gt_examples(L):
    assert matrix_gt(add_diag(L, 8.1), 5.0)
    assert not matrix_gt(SymOp(np.eye(1)), 2.0)
    assert matrix_gt(L, 0.0)


def test_sqrt_examples(L, rng):
    np.testing.assert_allclose(sqrt_spd(SymOp(4.0 * np.eye(3))).dense, 2.0 * np.eye(3), atol=1e-14)
    R = sqrt_spd(L)
    for _ in range(10):
        x = rng.standard_normal(3)
        y, ref = apply(R, apply(R, x)), apply(L, x)
        assert np.linalg.norm(y - ref) <= 1e-9 * np.linalg.norm(ref)
    with pytest.raises(NotPositiveSemidefinite):
        sqrt_spd(SymOp(np.diag([1.0, -1.0])))


def test_solve_round_trip(g31, rng):
    L = assemble_neg_laplacian(g31, 0.01)
    for _ in range(100):
        A = add_diag(L, rng.uniform(0.01, 50.0, g31.N))
        b = rng.standard_normal(g31.N)
        x = solve_spd(A, b)
        assert np.linalg.norm(apply(A, x) - b) <= 1e-10 * np.linalg.norm(b)


def test_cg_branch_large_grid(rng):
    g = build_grid(GridSpec(2, 1.0, 50))  # 2500 unknowns, above the dense limit
    A = add_diag(assemble_neg_laplacian(g, 1.0), 1.0)
    b = rng.standard_normal(g.N)
    x = solve_spd(A, b, tol=1e-10)
    assert np.linalg.norm(apply(A, x) - b) <= 1e-9 * np.linalg.norm(b)
    with pytest.raises(NotPositiveDefinite):
        solve_spd(add_diag(A, -100.0), b)
    lo = min_eig(A)
    assert lo == pytest.approx(1.0 + 2 * (2 - 2 * math.cos(math.pi * g.h)) / g.h ** 2, rel=1e-6)


def test_eigs_bracket_rayleigh(g31, rng):
    A = add_diag(assemble_neg_laplacian(g31, 0.05), rng.uniform(-20, 20, g31.N))
    lo, hi = min_eig(A), max_eig(A)
    for _ in range(100):
        x = rng.standard_normal(g31.N)
        q = x @ apply(A, x) / (x @ x)
        assert lo - 1e-10 <= q <= hi + 1e-10


@pytest.mark.parametrize("n", [1, 5, 40, 200])
def test_matrix_gt_matches_dense_oracle(n, rng):
    g = build_grid(GridSpec(1, 1.0, n))
    for _ in range(5):
        A = add_diag(assemble_neg_laplacian(g, 0.001), rng.uniform(-3, 3, n))
        c = rng.uniform(-3, 3)
        oracle = sla.eigvalsh(A.dense)[0] > c + 1e-10
        assert matrix_gt(A, c) == oracle
