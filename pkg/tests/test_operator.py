import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from paneitz_reduce.fields import TorusField, ZonalField, constant_field
from paneitz_reduce.geometry import SPHERE, TORUS, ManifoldModel
from paneitz_reduce.operator import (
    DegenerateError,
    Nonlinearity,
    OperatorError,
    apply_pg,
    coercivity_check,
    constant_spec,
    constant_u0_value,
    einstein_coefficients,
    general_spec,
    istar,
    nondegeneracy_check,
    nonlinearity_eval,
    paneitz_tensor,
    pg_inner,
    pg_norm,
    q_curvature,
)

T5 = ManifoldModel(TORUS, 5, 8)
S6 = ManifoldModel(SPHERE, 6, 48)


def _sym_paneitz(n):
    """a_P and Q_g on the unit sphere from the general curvature formulas, in exact arithmetic."""
    n = sp.Integer(n)
    R, lam = n * (n - 1), n - 1
    aP = ((n - 2) ** 2 + 4) / (2 * (n - 1) * (n - 2)) * R - 4 / (n - 2) * lam
    ric2 = n * lam**2
    Q = (n**3 - 4 * n**2 + 16 * n - 16) / (8 * (n - 1) ** 2 * (n - 2) ** 2) * R**2 - 2 / (n - 2) ** 2 * ric2
    b = (n**2 - 2 * n - 4) * lam / (2 * (n - 1))
    c = n * (n - 4) * (n**2 - 4) * lam**2 / (16 * (n - 1) ** 2)
    return aP, Q, b, c


@pytest.mark.parametrize("n", range(5, 14))
def test_paneitz_matches_einstein_form(n):
    model = ManifoldModel(SPHERE, n, 8)
    aP, Q, b, c = _sym_paneitz(n)
    assert sp.simplify(aP - b) == 0
    assert sp.simplify((n - 4) * Q / 2 - c) == 0
    assert paneitz_tensor(model)[0] == einstein_coefficients(n, n - 1)[0]
    assert paneitz_tensor(model)[0] == float(aP)
    assert abs((n - 4) * q_curvature(model) / 2 - einstein_coefficients(n, n - 1)[1]) <= 1e-12 * float(c)


def test_paneitz_examples():
    assert paneitz_tensor(ManifoldModel(SPHERE, 6, 8)) == (10.0, 60.0)
    assert paneitz_tensor(ManifoldModel(SPHERE, 8, 8))[0] == 22.0
    assert paneitz_tensor(T5) == (0.0, 0.0)
    assert q_curvature(T5) == 0.0
    assert einstein_coefficients(6, 5) == (10.0, 24.0)
    assert einstein_coefficients(8, 7) == (22.0, 120.0)
    assert einstein_coefficients(9, 0) == (0.0, 0.0)
    assert q_curvature(ManifoldModel(SPHERE, 6, 8)) == pytest.approx(2 * 24 / (6 - 4))


def test_constant_field_multiplier():
    spec = constant_spec(S6, 3.0, 2.5)
    one = constant_field(S6, 1.0)
    # roundoff in the top modes is amplified by m(lambda_max) ~ 1e7, hence atol
    np.testing.assert_allclose(apply_pg(spec, one).values, 2.5, atol=1e-12 * spec.coeffs.multiplier(48 * 53))
    torus = constant_spec(T5, 3.0, 2.5)
    np.testing.assert_allclose(apply_pg(torus, constant_field(T5, 1.0)).values, 2.5, rtol=1e-14)
    assert pg_inner(spec, one, one) == pytest.approx(2.5 * S6.volume, rel=1e-10)


def test_torus_cosine_example():
    spec = constant_spec(T5, 1.0, 1.0)
    u = TorusField.from_function(T5, lambda *x: np.cos(x[0]) + 0 * x[1])
    np.testing.assert_allclose(apply_pg(spec, u).values, 3 * u.values, atol=1e-12)
    np.testing.assert_allclose(istar(spec, u * 3.0).values, u.values, atol=1e-12)
    np.testing.assert_allclose(istar(spec, constant_field(T5, 1.0)).values, 1.0, rtol=1e-12)


def _random_torus(seed):
    rng = np.random.default_rng(seed)
    u = TorusField(T5, rng.standard_normal((8,) * 5))
    return u.apply_multiplier(lambda lam: 1.0 / (1.0 + lam) ** 2)


def _random_zonal(seed):
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(S6.resolution) / (1.0 + np.arange(S6.resolution)) ** 3
    return constant_field(S6, 0.0).from_coefficients(coeffs)


@given(st.integers(0, 10_000))
def test_self_adjoint_and_istar_torus(seed):
    spec = constant_spec(T5, 2.0, 1.5)
    u, f = _random_torus(seed), _random_torus(seed + 1)
    assert pg_inner(spec, u, f) == pytest.approx(pg_inner(spec, f, u), rel=1e-9, abs=1e-9)
    assert pg_inner(spec, u, istar(spec, f)) == pytest.approx(u.l2_inner(f), rel=1e-9, abs=1e-9)
    np.testing.assert_allclose(apply_pg(spec, istar(spec, f)).values, f.values, atol=1e-9)


@given(st.integers(0, 10_000))
def test_self_adjoint_and_istar_sphere(seed):
    spec = constant_spec(S6, 10.0, 25.0)
    u, f = _random_zonal(seed), _random_zonal(seed + 7)
    assert pg_inner(spec, u, f) == pytest.approx(pg_inner(spec, f, u), rel=1e-9, abs=1e-9)
    assert pg_inner(spec, u, istar(spec, f)) == pytest.approx(u.l2_inner(f), rel=1e-9, abs=1e-9)


def test_general_coefficients_roundtrip():
    a = TorusField.from_function(T5, lambda *x: 1.0 + 0.3 * np.cos(x[0]) * np.cos(x[1]))
    spec = general_spec(T5, a, 1.0)
    f = _random_torus(5)
    u = istar(spec, f)
    np.testing.assert_allclose(apply_pg(spec, u).values, f.values, atol=1e-9)
    assert spec.coercive
    # with a constant a, the general path equals the constant one on fields
    # without Nyquist content (gradient then divergence drops that mode)
    flat = general_spec(T5, 1.0, 1.0)
    g = TorusField.from_function(T5, lambda *x: np.cos(x[0]) * np.cos(2 * x[1]) + np.sin(x[2] + 3 * x[3]) + x[4] * 0)
    np.testing.assert_allclose(apply_pg(flat, g).values, apply_pg(constant_spec(T5, 1.0, 1.0), g).values, atol=1e-10)


def test_general_coefficients_only_on_torus():
    with pytest.raises(OperatorError):
        general_spec(S6, 1.0, 1.0)


def test_pg_norm_requires_coercivity():
    spec = constant_spec(S6, -13.0, 40.0)
    with pytest.raises(OperatorError):
        pg_norm(spec, constant_field(S6, 1.0))


@pytest.mark.parametrize("model,b,c,ok", [(T5, 1.0, 1.0, True), (S6, 1.0, 1.0, True),
                                          (T5, 0.0, -1.0, False), (S6, -13.0, 40.0, False)])
def test_coercivity_examples(model, b, c, ok):
    good, worst = coercivity_check(constant_spec(model, b, c))
    assert good is ok
    if model is S6 and b == -13.0:
        assert worst == pytest.approx(-2.0)


def test_nonlinearity_examples():
    nl = Nonlinearity(6, 0.0)
    one = constant_field(S6, 1.0)
    assert nonlinearity_eval(nl, one, "f").values[0] == 1.0
    # F(1) = 1/2* = 1/6 (the primitive of s^5)
    assert nonlinearity_eval(nl, one, "F").values[0] == pytest.approx(1 / 6)
    assert nonlinearity_eval(nl, one, "f'").values[0] == pytest.approx(5.0)
    assert nonlinearity_eval(nl, -one, "f").values[0] == -1.0
    assert Nonlinearity(5, 0.01).f(2.0) == pytest.approx(2 ** (9 - 0.01), rel=1e-14)
    assert Nonlinearity(5, 0.01).f(2.0) == pytest.approx(508.46, abs=0.01)
    with pytest.raises(OperatorError):
        Nonlinearity(6, 0.2)


@given(st.floats(-50, 50), st.floats(0.0, 0.1), st.sampled_from([5, 6, 9, 12]))
def test_nonlinearity_properties(u, eps, n):
    nl = Nonlinearity(n, eps)
    assert nl.f(-u) == -nl.f(u)
    assert nl.F(-u) == nl.F(u)
    assert nl.fprime(u) >= 0
    h = 1e-6 * max(1.0, abs(u))
    fd = (nl.F(u + h) - nl.F(u - h)) / (2 * h)
    assert fd == pytest.approx(float(nl.f(u)), rel=1e-6, abs=1e-6 * max(1.0, abs(float(nl.f(u)))))


def test_u0_solves_equation():
    for model, b, c in [(T5, 1.0, 1.0), (S6, 10.0, 25.0), (ManifoldModel(SPHERE, 9, 32), 39.5, 1.0)]:
        spec = constant_spec(model, b, c)
        u0 = constant_u0_value(spec)
        nl = Nonlinearity(model.n, 0.0)
        assert c * u0 == pytest.approx(float(nl.f(u0)), rel=1e-13)
    assert constant_u0_value(constant_spec(S6, 10.0, 25.0)) == pytest.approx(25 ** 0.25)


def test_nondegeneracy_torus5():
    out = nondegeneracy_check(constant_spec(T5, 1.0, 1.0))
    assert out["min_abs_multiplier"] == pytest.approx(2.0)
    assert not out["degenerate"]


def test_round_sphere_paneitz_is_degenerate():
    with pytest.raises(DegenerateError) as info:
        nondegeneracy_check(constant_spec(S6, 10.0, 24.0))
    assert info.value.mode == 1
    assert info.value.value == pytest.approx(0.0, abs=1e-8)
    out = nondegeneracy_check(constant_spec(S6, 10.0, 24.0), raise_on_failure=False)
    assert out["degenerate"] and out["mode"] == 1


def test_detuned_sphere_is_nondegenerate():
    out = nondegeneracy_check(constant_spec(S6, 10.0, 25.0))
    assert out["min_abs_multiplier"] == pytest.approx(4.0)
    assert out["mode"] == 1
    assert out["min_abs_multiplier"] >= 1.0


def test_general_nondegeneracy_matches_constant():
    out = nondegeneracy_check(general_spec(T5, 1.0, 1.0), 1.0)
    assert out["min_abs_multiplier"] == pytest.approx(2.0, rel=1e-3)
