import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from paneitz_reduce.bubble import THEOREM2, ScaleLaw, sharp_constant_quotient
from paneitz_reduce.energy import (ExpansionError, c1_constant, cn_constant, cn_integral, cn_numeric, dj_eps,
                                   expansion_constants, g_reduced, i2_leading, i2_quadrature, j_eps, phi_terms,
                                   reduced_energy, sobolev_kn, t_star)
from paneitz_reduce.fields import TorusField, constant_field
from paneitz_reduce.geometry import SPHERE, TORUS, ManifoldModel
from paneitz_reduce.operator import Nonlinearity, constant_spec, paneitz_tensor

T5 = ManifoldModel(TORUS, 5, 8)
SPEC5 = constant_spec(T5, 1.0, 1.0)


@pytest.fixture(scope="module")
def report5():
    return expansion_constants(SPEC5, ScaleLaw(5))


# -- J and DJ ---------------------------------------------------------------------------

def test_j_of_zero():
    assert j_eps(SPEC5, Nonlinearity(5, 1e-3), constant_field(T5, 0.0)) == 0.0


def test_j_at_u0():
    # ||u0||^2 = int u0^{2*} at eps = 0, so J = (1/2 - 1/2*) (2 pi)^5 = (2/5)(2 pi)^5
    val = j_eps(SPEC5, Nonlinearity(5, 0.0), constant_field(T5, 1.0))
    assert val == pytest.approx(0.4 * (2 * math.pi) ** 5, rel=1e-13)


@given(st.integers(0, 2**31), st.sampled_from([0.0, 1e-3, 1e-2]))
def test_dj_matches_finite_differences(seed, eps):
    rng = np.random.default_rng(seed)
    u = TorusField(T5, 1.0 + 0.2 * rng.standard_normal((8,) * 5))
    v = TorusField(T5, rng.standard_normal((8,) * 5))
    nl = Nonlinearity(5, eps)
    h = 1e-5
    fd = (j_eps(SPEC5, nl, u + v * h) - j_eps(SPEC5, nl, u - v * h)) / (2 * h)
    exact = dj_eps(SPEC5, nl, u, v)
    assert fd == pytest.approx(exact, rel=1e-6, abs=1e-6 * abs(exact) + 1e-8)


# -- constants ------------------------------------------------------------------------------

def test_kn_formula_example():
    # the formula itself gives 247.284 (see notes on the quoted 247.80)
    expected = 24 * (16 * math.pi**3 / 15) ** (2 / 3)
    assert sobolev_kn(6)[1] == pytest.approx(expected, rel=1e-14)
    assert sobolev_kn(6)[1] == pytest.approx(247.284, abs=1e-3)


@pytest.mark.parametrize("n", [5, 6, 8])
def test_kn_matches_quadrature_of_extremal(n):
    assert sharp_constant_quotient(n) == pytest.approx(sobolev_kn(n)[1], rel=1e-4)


def test_kn_increasing():
    vals = [sobolev_kn(n)[1] for n in range(5, 14)]
    assert all(v > 0 for v in vals)
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_c1_example():
    assert c1_constant(6) == pytest.approx(sobolev_kn(6)[1] ** 1.5 / 3, rel=1e-14)
    assert c1_constant(6) == pytest.approx(1296.21, abs=0.01)


@pytest.mark.parametrize("n", [5, 8, 11])
def test_cn_integral_against_mpmath(n):
    mpmath.mp.dps = 30
    ref = mpmath.quad(lambda r: r ** (mpmath.mpf(n - 2) / 2) * mpmath.log1p(r) / (1 + r) ** n,
                      [0, 1, mpmath.inf])
    val, err = cn_integral(n)
    assert val > 0
    assert abs(val - float(ref)) <= 1e-10
    assert err <= 1e-10


def test_cn_printed_tail_example():
    # both forms share the head integral, so their difference is the difference of the tails
    X = 8 * 4 * 60
    assert X == 1920
    printed_tail = (1 - 0.25 * math.log(1920)) / 3
    derived_tail = 2 * (1 / 8 - 0.25 * math.log(1920))
    diff = cn_constant(8, "printed") - cn_constant(8, "derived")
    assert diff == pytest.approx(printed_tail - derived_tail, rel=1e-12)


@pytest.mark.parametrize("n", [5, 6, 8, 9])
def test_cn_derived_matches_energy_derivative(n):
    # route 1: closed head integral + derived tail; route 2: d/d eps of the bubble energy
    assert cn_numeric(n) == pytest.approx(cn_constant(n, "derived"), abs=1e-6 * max(1.0, abs(cn_constant(n, "derived"))))


def test_cn_unknown_form():
    with pytest.raises(ValueError):
        cn_constant(5, "other")


@pytest.mark.parametrize("exponent", ["sqrt", "power"])
def test_log_coefficients_by_substitution(exponent):
    # the bubble energy carries -c1 eps (C_n + (n-4)^2/8 ln delta); substitute delta(t)
    n, t, eps, c1 = sp.symbols("n t epsilon c1", positive=True)
    delta = sp.sqrt(t * eps) if exponent == "sqrt" else (t * eps) ** (2 / (n - 4))
    term = sp.expand_log(-c1 * eps * (n - 4) ** 2 / 8 * sp.log(delta), force=True)
    # c4 is minus the coefficient of eps ln t
    c4 = sp.simplify(-sp.diff(term, t) * t / eps)
    expected = c1 * (n - 4) ** 2 / 16 if exponent == "sqrt" else c1 * (n - 4) / 4
    assert sp.simplify(c4 - expected) == 0


def test_report_uses_regime_log_coefficient():
    for n in (5, 6):
        rep = expansion_constants(constant_spec(ManifoldModel(TORUS, n, 8), 1.0, 1.0), ScaleLaw(n))
        expected = rep.c1 * ((n - 4) ** 2 / 16 if rep.regime == "sqrt" else (n - 4) / 4)
        assert rep.c4 == pytest.approx(expected, rel=1e-14)
        assert rep.c3 == -rep.c4


def test_phi_torus5(report5):
    expected = 2**5 * (8 * math.pi**2 / 3) / (7 * 105 ** (1 / 8) * math.pi**3)
    assert report5.phi_xi == pytest.approx(expected, rel=1e-13)
    assert report5.trace_term == 0.0


def test_c5_torus5(report5):
    expected = 0.4 * (2 * math.pi) ** 5 + 0.4 * sobolev_kn(5)[1] ** 1.25
    assert report5.c5 == pytest.approx(expected, rel=1e-13)


def test_c2_torus5(report5):
    # ln u0 = 0 for u0 = 1, so c2 = -(1/2*)^2 vol - c1 C_n with 2* = 10
    expected = -(2 * math.pi) ** 5 / 100 - report5.c1 * report5.Cn
    assert report5.c2 == pytest.approx(expected, rel=1e-13)


def test_phi_indicator_pattern():
    assert all(v != 0 for v in phi_terms(8, 1.0, 1.0))
    tr, u = phi_terms(9, 1.0, 1.0)
    assert tr != 0 and u == 0
    tr, u = phi_terms(5, 1.0, 1.0)
    assert tr == 0 and u != 0
    assert phi_terms(10, 1.0, 1.0, THEOREM2)[0] == 0


@pytest.mark.parametrize("kind", [SPHERE, TORUS])
@pytest.mark.parametrize("n", [5, 6, 8, 9, 10, 11, 12, 13])
def test_c1_c4_positive(kind, n):
    model = ManifoldModel(kind, n, 8)
    b = paneitz_tensor(model)[0] + 1.0
    rep = expansion_constants(constant_spec(model, b, 1.0), ScaleLaw(n))
    assert rep.c1 > 0 and rep.c4 > 0


def test_n7_refused():
    with pytest.raises(ExpansionError):
        expansion_constants(constant_spec(ManifoldModel(SPHERE, 7, 8), 20.0, 1.0), ScaleLaw(7))


def test_theorem2_needs_paneitz_tensor():
    with pytest.raises(ExpansionError):
        expansion_constants(constant_spec(ManifoldModel(SPHERE, 10, 8), 50.0, 1.0), ScaleLaw(10, THEOREM2))


# -- G and t0 ----------------------------------------------------------------------------------

def test_g_stationary_at_t0(report5):
    t0 = t_star(report5)
    assert -report5.c4 / t0 + report5.c1 * report5.phi_xi == pytest.approx(0.0, abs=1e-12 * report5.c4 / t0)


def test_g_blows_up_at_both_ends(report5):
    assert g_reduced(report5, 1e-12) > g_reduced(report5, 1e-6) > g_reduced(report5, t_star(report5))
    assert g_reduced(report5, 1e8) > g_reduced(report5, 1e4) > g_reduced(report5, t_star(report5))


def test_doubling_phi_halves_t0(report5):
    assert t_star(report5, 2 * report5.phi_xi) == pytest.approx(t_star(report5) / 2, rel=1e-15)


def test_nonpositive_phi_has_no_minimum(report5):
    with pytest.raises(ExpansionError):
        t_star(report5, 0.0)


@given(st.floats(-8, 8), st.floats(0.01, 5))
def test_g_convex_in_log_t_with_minimum_at_t0(report5, s, h):
    t0 = t_star(report5)
    g = lambda x: float(g_reduced(report5, t0 * math.exp(x)))  # noqa: E731
    assert g(s) >= g(0.0) - 1e-9 * abs(g(0.0))
    assert g(s + h) + g(s - h) - 2 * g(s) >= -1e-9 * (abs(g(s)) + 1)


# -- I2 and reduced energy --------------------------------------------------------------------

@pytest.mark.parametrize("n", [5, 6, 8])
def test_i2_leading_coefficient(n):
    for delta in (1e-3, 1e-4):
        assert i2_quadrature(n, 1.0, delta) / i2_leading(n, 1.0, delta) == pytest.approx(1.0, rel=0.02)


def test_reduced_energy_gap_is_small_o_of_eps(torus5):
    gaps = [abs(reduced_energy(torus5, eps, 1.0)["gap"]) / eps for eps in (1e-3, 3e-4, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 0.1 * gaps[0]


def test_reduced_energy_t_sign(torus5, report5):
    eps = 1e-4
    base = reduced_energy(torus5, eps, 1.0)["I"]
    for t in (0.5, 2.0):
        diff = reduced_energy(torus5, eps, t)["I"] - base
        pred = g_reduced(report5, t) - g_reduced(report5, 1.0)
        assert np.sign(diff) == np.sign(pred)
