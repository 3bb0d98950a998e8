import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gldual.errors import DimensionMismatch, InvalidParameter
from gldual.grid import inner
from gldual.linalg import min_eig
from gldual.model import ModelParams, energy_J, energy_Jhat, grad_J, hess_J

from conftest import make_params

LMIN = 32 - 16 * np.sqrt(2)
fields3 = arrays(float, 3, elements=st.floats(-3, 3, allow_nan=False))


def test_energy_examples(g3, r1):
    assert energy_J(r1, g3, np.zeros(3)) == pytest.approx(0.375, abs=1e-15)
    assert energy_J(r1.replace(f=np.ones(3)), g3, np.zeros(3)) == pytest.approx(0.375, abs=1e-15)
    assert energy_J(r1, g3, np.ones(3)) == pytest.approx(4.0, abs=1e-14)


def test_jhat_examples(g3, r1, rng):
    assert energy_Jhat(r1, g3, np.zeros(3), np.zeros(3)) == pytest.approx(0.375)
    assert energy_Jhat(r1, g3, np.zeros(3), np.ones(3)) == pytest.approx(4.125)
    for _ in range(20):
        u = rng.standard_normal(3)
        assert energy_Jhat(r1, g3, u, u) == energy_J(r1, g3, u)


def test_grad_examples(g3, r1, r2):
    np.testing.assert_array_equal(grad_J(r1, g3, np.zeros(3)), 0.0)
    np.testing.assert_allclose(grad_J(r2, g3, np.zeros(3)), -0.5)


def test_hess_examples(g3, r1):
    assert min_eig(hess_J(r1, g3, np.zeros(3))) == pytest.approx(LMIN - 2, abs=1e-10)
    assert min_eig(hess_J(r1, g3, np.ones(3))) == pytest.approx(LMIN + 4, abs=1e-10)


def test_params_validation(g3):
    with pytest.raises(InvalidParameter):
        make_params(g3, alpha=0.0)
    with pytest.raises(InvalidParameter):
        ModelParams(1, 1, 1, 1, 1, np.array([np.nan]))
    p = make_params(g3)
    with pytest.raises(ValueError):
        p.f[0] = 2.0
    with pytest.raises(DimensionMismatch):
        energy_J(p, g3, np.zeros(4))


def test_grad_matches_central_differences(g31, rng):
    P = make_params(g31, gamma=0.05, f=0.5)
    for _ in range(50):
        u = rng.uniform(-2, 2, g31.N)
        g = grad_J(P, g31, u)
        d = rng.standard_normal(g31.N)
        h = 1e-5
        fd = (energy_J(P, g31, u + h * d) - energy_J(P, g31, u - h * d)) / (2 * h)
        assert fd == pytest.approx(inner(g31, g, d), rel=1e-6, abs=1e-9)


def test_hess_matches_second_differences(g31, rng):
    P = make_params(g31, gamma=0.05, f=0.5)
    for _ in range(50):
        u = rng.uniform(-2, 2, g31.N)
        d = rng.standard_normal(g31.N)
        d /= np.linalg.norm(d)
        h = 1e-4
        second = (energy_J(P, g31, u + h * d) - 2 * energy_J(P, g31, u) + energy_J(P, g31, u - h * d)) / h ** 2
        assert second == pytest.approx(inner(g31, hess_J(P, g31, u).dense @ d, d), rel=1e-5)


def test_strict_local_min_along_scans(g3, r2, rng):
    from gldual.primal import newton

    cp = newton(r2, g3, np.zeros(3))
    assert min_eig(hess_J(r2, g3, cp.u0)) > 0
    J0 = energy_J(r2, g3, cp.u0)
    for _ in range(20):
        d = rng.standard_normal(3)
        for t in (1e-3, -1e-3, 1e-2, -1e-2):
            assert energy_J(r2, g3, cp.u0 + t * d) > J0


def test_jhat_hessian_is_p_independent(g3, r2, rng):
    u = rng.standard_normal(3)
    d = rng.standard_normal(3)
    h = 1e-4
    expected = inner(g3, hess_J(r2, g3, u).dense @ d, d) + r2.K * inner(g3, d, d)
    for _ in range(5):
        p = rng.standard_normal(3)
        second = (energy_Jhat(r2, g3, u + h * d, p) - 2 * energy_Jhat(r2, g3, u, p)
                  + energy_Jhat(r2, g3, u - h * d, p)) / h ** 2
        assert second == pytest.approx(expected, rel=1e-6)


@given(fields3)
def test_even_symmetry_without_f(u):
    from gldual.grid import GridSpec, build_grid

    g = build_grid(GridSpec(1, 1.0, 3))
    P = make_params(g, beta=2.0)
    assert energy_J(P, g, -u) == pytest.approx(energy_J(P, g, u), rel=1e-14, abs=1e-14)
