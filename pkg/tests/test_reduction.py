import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from paneitz_reduce.bubble import ScaleLaw
from paneitz_reduce.driver import build_config, make_problem
from paneitz_reduce.fields import TorusField
from paneitz_reduce.geometry import TORUS, ManifoldModel
from paneitz_reduce.operator import constant_spec, general_spec
from paneitz_reduce.reduction import (Discretization, ReductionError, ReductionProblem, taylor_bound_check)


@pytest.fixture(scope="module")
def state(torus5):
    s = torus5.state(1e-3, 1.0)
    s.solve_phi()
    return s


@pytest.fixture(scope="module")
def exact(torus5):
    """W = 0, eps = 0: u0 solves the equation, Z_0 still defines K."""
    return torus5.state(0.0, delta=1e-2, bubble=False)


def unit(state, seed):
    v = np.random.default_rng(seed).standard_normal(state.space.dim)
    return v / np.linalg.norm(v)


# -- projections ------------------------------------------------------------------

def test_project_z0_is_kernel(state):
    par, perp = state.project(state.zhat)
    np.testing.assert_allclose(par, state.zhat, atol=1e-14)
    assert np.linalg.norm(perp) < 1e-14


def test_project_orthogonal_vector(state):
    v = state.perp(unit(state, 1))
    par, perp = state.project(v)
    assert np.linalg.norm(par) < 1e-14
    np.testing.assert_allclose(perp, v, atol=1e-14)


@given(st.integers(0, 2**31))
def test_projection_idempotent_and_orthogonal(state, seed):
    v = unit(state, seed)
    par, perp = state.project(v)
    np.testing.assert_allclose(state.project(par)[0], par, atol=1e-12)
    np.testing.assert_allclose(par + perp, v, atol=1e-14)
    assert abs(state.z @ perp) <= 1e-10 * np.linalg.norm(state.z)


def test_gram_condition(state):
    g = state.gram
    assert np.allclose(g, g.T) and np.all(np.linalg.eigvalsh(g) > 0)
    assert state.diagnostics["gram_cond"] < 1e6


# -- exact synthetic case -----------------------------------------------------------

def test_exact_case_has_zero_residual(exact, torus5):
    # ||u0||_{P_g}^2 = h u0^2 vol
    u0_norm = np.sqrt(torus5.spec.c * torus5.u0**2 * (2 * np.pi) ** 5)
    assert exact.residual_R()[1] <= 1e-12 * u0_norm


def test_exact_case_phi_is_zero_in_one_step(exact):
    c = exact.solve_phi()
    assert exact.diagnostics["iterations"] == 1
    assert np.linalg.norm(c) < 1e-12


@pytest.mark.parametrize("which", ["exact", "state"])
def test_L_round_trip(which, exact, state):
    s = exact if which == "exact" else state
    rhs = s.perp(unit(s, 7))
    phi = s.solve_L(rhs)
    assert np.linalg.norm(s.apply_L(phi) - rhs) <= 1e-8
    assert abs(s.z @ phi) <= 1e-10 * np.linalg.norm(phi) * np.linalg.norm(s.z)


def test_L_round_trip_large_rhs(state):
    # right-hand sides of huge norm used to fool MINRES's stopping test
    rhs = 1e13 * state.perp(unit(state, 3))
    phi = state.solve_L(rhs)
    assert np.linalg.norm(state.apply_L(phi) - rhs) <= 1e-9 * 1e13


def test_solve_L_zero(state):
    assert not np.any(state.solve_L(np.zeros(state.space.dim)))


def test_invertibility_is_delta_independent(torus5):
    ratios = [torus5.state(1e-3, delta=d).invertibility() for d in (1e-2, 3e-3, 1e-3)]
    assert min(ratios) > 0
    assert max(ratios) / min(ratios) <= 2.0


# -- nonlinear remainder ------------------------------------------------------------------

def test_N_vanishes_at_zero(state):
    assert np.linalg.norm(state.nonlinear_N(np.zeros(state.space.dim))) == 0.0


def test_N_superlinear(state):
    phi = 1e-4 * state.perp(unit(state, 11))
    base = np.linalg.norm(state.nonlinear_N(phi))
    for s in (2.0, 4.0):
        assert np.linalg.norm(state.nonlinear_N(s * phi)) / base >= s**1.5


def test_N_in_K_perp(state):
    N = state.nonlinear_N(1e-3 * state.perp(unit(state, 5)))
    assert abs(state.zhat @ N) <= 1e-10 * max(np.linalg.norm(N), 1e-300)


# -- Picard solve ------------------------------------------------------------------------

def test_solved_phi_invariants(state, torus5):
    d = state.diagnostics
    assert d["constraint_violation"] <= 1e-8
    u0_norm = np.sqrt(torus5.spec.c * (2 * np.pi) ** 5)
    assert state.equation_residual() <= 1e-7 * u0_norm
    assert d["norm_phi"] <= torus5.gamma * d["norm_R"]


def test_ball_violation_is_reported(torus5):
    s = torus5.state(1e-3, 1.0)
    with pytest.raises(ReductionError, match="ball"):
        s.solve_phi(gamma=1e-3)


def test_energy_without_bubble_is_J_of_u0(exact, torus5):
    # J_0(u0) = (1/2 - 1/2*) int u0^{2*} = (2/5)(2 pi)^5 for u0 = 1, n = 5
    assert exact.energy() == pytest.approx(0.4 * (2 * np.pi) ** 5, rel=1e-12)


# -- problem validation ------------------------------------------------------------------

def test_problem_rejects_mismatched_dimension():
    spec = constant_spec(ManifoldModel(TORUS, 5, 8), 1.0, 1.0)
    with pytest.raises(ReductionError):
        ReductionProblem(spec, ScaleLaw(6))


def test_problem_rejects_variable_coefficients():
    model = ManifoldModel(TORUS, 5, 8)
    a = TorusField.from_function(model, lambda *x: 1.0 + 0.1 * np.cos(x[0]))
    with pytest.raises(ReductionError):
        ReductionProblem(general_spec(model, a, 1.0), ScaleLaw(5))


def test_problem_rejects_ball_beyond_torus():
    spec = constant_spec(ManifoldModel(TORUS, 5, 8), 1.0, 1.0)
    with pytest.raises(ReductionError):
        ReductionProblem(spec, ScaleLaw(5), disc=Discretization(rho=3.5))


# -- Taylor harness -------------------------------------------------------------------------

def test_taylor_triangle_case():
    assert taylor_bound_check(1.0, "dp1") <= 1.0 + 1e-12


def test_taylor_half_power():
    c1 = taylor_bound_check(0.5, "dp1", samples=20000)
    c2 = taylor_bound_check(0.5, "dp1", samples=40000)
    assert c1 <= 2.0 and c2 <= 2.0
    assert abs(c2 - c1) <= 0.05 * c1


def test_taylor_dp2_quadratic_bound():
    assert np.isfinite(taylor_bound_check(2.0, "dp2"))


@given(st.floats(0.05, 3.0), st.sampled_from(["dp1", "dp2"]))
def test_taylor_constants_finite(theta, which):
    assert 0 < taylor_bound_check(theta, which, samples=10000) < 1e3


def test_taylor_rejects_bad_input():
    with pytest.raises(ValueError):
        taylor_bound_check(0.0)
    with pytest.raises(ValueError):
        taylor_bound_check(1.0, "dp3")


# -- slow scaling runs --------------------------------------------------------------------

@pytest.mark.slow
def test_contraction_and_uniqueness_at_small_eps(torus5):
    s = torus5.state(1e-4, 1.0)
    s.solve_phi()
    assert all(r <= 0.5 for r in s.diagnostics["contraction"][1:])
    assert s.uniqueness_probe(seed=0) <= 1e-7


@pytest.mark.slow
def test_torus6_residual_ratio():
    problem = make_problem(build_config({"preset": "torus6"}))
    hi = problem.state(1e-3, 1.0).residual_R()[1]
    lo = problem.state(1e-4, 1.0).residual_R()[1]
    assert 7.0 <= hi / lo <= 13.0
