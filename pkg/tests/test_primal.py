import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gldual.errors import NoConvergence, NotConvex
from gldual.grid import GridSpec, build_grid
from gldual.model import energy_J, grad_J
from gldual.primal import Classification, classify, convexity_K, newton, prox_iterate, prox_step

from conftest import make_params

LMIN = 32 - 16 * np.sqrt(2)


def test_newton_already_critical(g3, r1):
    cp = newton(r1, g3, np.zeros(3))
    assert cp.iterations == 0 and np.all(cp.u0 == 0)
    assert cp.classification is Classification.LOCAL_MIN


def test_newton_r2(g3, r2):
    cp = newton(r2, g3, np.zeros(3), tol=1e-10)
    assert cp.residual_norm <= 1e-10 and cp.iterations <= 10
    # dense oracle: scipy root on the same three equations
    from scipy.optimize import fsolve

    ref = fsolve(lambda u: grad_J(r2, g3, u), np.zeros(3), xtol=1e-12)
    np.testing.assert_allclose(cp.u0, ref, atol=1e-10)


def test_newton_iteration_cap(g3, r2):
    with pytest.raises(NoConvergence) as exc:
        newton(r2, g3, np.full(3, 50.0), tol=1e-10, maxit=1)
    assert exc.value.best is not None


def test_newton_rejects_bad_tol(g3, r2):
    with pytest.raises(ValueError):
        newton(r2, g3, np.zeros(3), tol=0.0)


def test_newton_reaches_maximum(g3):
    P = make_params(g3, beta=40.0)
    cp = newton(P, g3, np.full(3, 0.1))
    assert cp.classification is Classification.LOCAL_MAX


def test_prox_step_examples(g3, r1, r2):
    np.testing.assert_array_equal(prox_step(r1, g3, np.zeros(3)), 0.0)
    u = prox_step(r2, g3, np.zeros(3), tol=1e-10)
    assert np.linalg.norm(grad_J(r2, g3, u) + r2.K * u) <= 1e-10
    cp = newton(r2, g3, np.zeros(3))
    np.testing.assert_allclose(prox_step(r2, g3, cp.u0), cp.u0, atol=1e-12)


def test_prox_step_not_convex(g3):
    # beta = 10, K = 1: Jhat(., 0) has negative curvature at its stationary point 0
    P = make_params(g3, beta=10.0, K=1.0)
    with pytest.raises(NotConvex):
        prox_step(P, g3, np.zeros(3))


def test_prox_iterate_examples(g3, r1, r2):
    res = prox_iterate(r1, g3, np.zeros(3))
    assert res.point.iterations == 1 and np.all(res.point.u0 == 0)
    res = prox_iterate(r2, g3, np.zeros(3))
    assert res.point.residual_norm <= 1e-8
    assert np.all(np.diff(res.trace) <= 1e-12)


def test_prox_iterate_monotone_random(g3, r2, rng):
    for _ in range(20):
        res = prox_iterate(r2, g3, rng.uniform(-2, 2, 3))
        assert np.all(np.diff(res.trace) <= 1e-12)
        # fixed points are critical: ||grad|| <= K tol + tol
        assert res.point.residual_norm <= (r2.K + 1) * 1e-10 + 1e-12


@pytest.mark.parametrize("beta,expected,eigs", [
    (1.0, Classification.LOCAL_MIN, (LMIN - 2, None)),
    (40.0, Classification.LOCAL_MAX, (None, 32 + 16 * np.sqrt(2) - 80)),
    (10.0, Classification.SADDLE, (LMIN - 20, None)),
])
def test_classify(g3, beta, expected, eigs):
    P = make_params(g3, beta=beta)
    assert classify(P, g3, np.zeros(3)) is expected


def test_classify_degenerate(g3):
    # choose beta so that LMIN - 2 beta = 0 exactly at u = 0
    P = make_params(g3, beta=LMIN / 2)
    assert classify(P, g3, np.zeros(3)) is Classification.DEGENERATE


def test_convexity_K(g3, r1):
    assert convexity_K(r1, g3, np.zeros(3)) == 0.0
    assert convexity_K(make_params(g3, beta=10.0), g3, np.zeros(3)) == pytest.approx(20 - LMIN, abs=1e-10)
    assert convexity_K(make_params(g3, beta=50.0), g3, np.zeros(3)) == pytest.approx(100 - LMIN, abs=1e-10)


@given(st.integers(0, 2 ** 32 - 1))
def test_newton_success_means_small_residual(seed):
    g = build_grid(GridSpec(1, 1.0, 5))
    P = make_params(g, gamma=0.01, beta=4.0, f=0.3)
    u0 = np.random.default_rng(seed).uniform(-3, 3, g.N)
    try:
        cp = newton(P, g, u0, tol=1e-10)
    except NoConvergence:
        return
    assert np.linalg.norm(grad_J(P, g, cp.u0)) <= 1e-10
    assert energy_J(P, g, cp.u0) == pytest.approx(energy_J(P, g, cp.u0))
