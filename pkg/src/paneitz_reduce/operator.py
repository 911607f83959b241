"""The fourth-order operator P_g, its inverse, the nonlinearity and u_0.

Sign convention: Delta_g is the geometers' Laplacian (nonnegative spectrum),
so for A = a g one has -div_g(A du) = a Delta_g u and a constant-coefficient
operator acts on an eigenfunction with eigenvalue lam by the multiplier
m(lam) = lam^2 + b lam + c.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg, minres

from .fields import Field, TorusField, constant_field
from .geometry import SPHERE, TORUS, ManifoldModel

LINEAR_TOL = 1e-10
LINEARIZATION_TOL = 1e-8


class OperatorError(ArithmeticError):
    """Non-coercive operators, failed solves and failed certificates."""


class DegenerateError(OperatorError):
    def __init__(self, message: str, mode: int | None = None, value: float | None = None):
        super().__init__(message)
        self.mode = mode
        self.value = value


# -- curvature data ---------------------------------------------------------

def _paneitz_coefficient_exact(kind: str, n: int) -> Fraction:
    if kind != SPHERE:
        return Fraction(0)
    R = Fraction(n * (n - 1))
    lam = Fraction(n - 1)
    return Fraction((n - 2) ** 2 + 4, 2 * (n - 1) * (n - 2)) * R - Fraction(4, n - 2) * lam


def paneitz_tensor(model: ManifoldModel) -> tuple[float, float]:
    """Coefficient a_P of A_paneitz = a_P g on an Einstein model, and its trace n a_P."""
    a = _paneitz_coefficient_exact(model.kind, model.n)
    return float(a), float(model.n * a)


def _q_curvature_exact(kind: str, n: int) -> Fraction:
    if kind != SPHERE:
        return Fraction(0)
    R = Fraction(n * (n - 1))
    ric2 = Fraction(n * (n - 1) ** 2)
    # the Laplacian of the scalar curvature vanishes on a homogeneous model
    return (Fraction(n**3 - 4 * n**2 + 16 * n - 16, 8 * (n - 1) ** 2 * (n - 2) ** 2) * R * R
            - Fraction(2, (n - 2) ** 2) * ric2)


def q_curvature(model: ManifoldModel) -> float:
    return float(_q_curvature_exact(model.kind, model.n))


def einstein_coefficients(n: int, lam: float) -> tuple[float, float]:
    """(b, c) of the Paneitz-Branson operator on an Einstein manifold with Ric = lam g.

    The potential is quadratic in lam; this is the only reading that gives
    c = (n-4)Q_g/2 on the round sphere.
    """
    if isinstance(lam, int):
        lam = Fraction(lam)
    b = Fraction(n * n - 2 * n - 4, 2 * (n - 1)) * lam
    c = Fraction(n * (n - 4) * (n * n - 4), 16 * (n - 1) ** 2) * lam * lam
    return float(b), float(c)


# -- operator specification -------------------------------------------------

@dataclass(frozen=True)
class ConstantCoeff:
    b: float
    c: float

    def multiplier(self, lam):
        lam = np.asarray(lam, dtype=float)
        return lam * lam + self.b * lam + self.c


@dataclass(frozen=True, eq=False)
class GeneralCoeff:
    """A = a(x) g and potential h(x) on the torus."""

    a: TorusField
    h: TorusField

    def __post_init__(self):
        if not isinstance(self.a, TorusField) or not isinstance(self.h, TorusField):
            raise OperatorError("GeneralCoeff is only available on the torus")

    def reference(self) -> ConstantCoeff:
        """Constant-coefficient operator used as a preconditioner."""
        a = max(float(np.mean(self.a.values)), 0.0)
        h = max(float(np.mean(self.h.values)), float(np.min(self.h.values)), 1e-3)
        return ConstantCoeff(a, h)


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    model: ManifoldModel
    coeffs: ConstantCoeff | GeneralCoeff
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def is_constant(self) -> bool:
        return isinstance(self.coeffs, ConstantCoeff)

    @property
    def b(self) -> float:
        if not self.is_constant:
            raise OperatorError("b is only defined for constant coefficients")
        return self.coeffs.b

    @property
    def c(self) -> float:
        if not self.is_constant:
            raise OperatorError("c is only defined for constant coefficients")
        return self.coeffs.c

    @cached_property
    def coercive(self) -> bool:
        return coercivity_check(self)[0]


def constant_spec(model: ManifoldModel, b: float, c: float) -> OperatorSpec:
    return OperatorSpec(model, ConstantCoeff(float(b), float(c)))


def general_spec(model: ManifoldModel, a, h) -> OperatorSpec:
    if model.kind != TORUS:
        raise OperatorError("GeneralCoeff is only available on the torus")
    a = a if isinstance(a, Field) else constant_field(model, float(a)) if np.isscalar(a) else TorusField(model, a)
    h = h if isinstance(h, Field) else constant_field(model, float(h)) if np.isscalar(h) else TorusField(model, h)
    return OperatorSpec(model, GeneralCoeff(a, h))


# -- application, inner product, inverse ------------------------------------

def _general_apply(coeffs: GeneralCoeff, u: TorusField) -> TorusField:
    bilap = u.apply_multiplier(lambda lam: lam * lam)
    flux = [coeffs.a.values * g for g in u.gradient()]
    second = -TorusField.divergence(u.model, flux)
    return bilap + second + coeffs.h * u


def apply_pg(spec: OperatorSpec, u: Field) -> Field:
    if u.model != spec.model:
        raise OperatorError("field and operator live on different models")
    if spec.is_constant:
        return u.apply_multiplier(spec.coeffs.multiplier)
    return _general_apply(spec.coeffs, u)


def pg_inner(spec: OperatorSpec, u: Field, v: Field) -> float:
    """<u, v>_{P_g} = int (P_g u) v dV (equal to the symmetric weak form)."""
    return apply_pg(spec, u).l2_inner(v)


def pg_norm(spec: OperatorSpec, u: Field) -> float:
    if not spec.coercive:
        raise OperatorError("P_g is not coercive, so <.,.>_{P_g} is not a norm")
    return float(np.sqrt(max(pg_inner(spec, u, u), 0.0)))


def istar(spec: OperatorSpec, f: Field, tol: float = LINEAR_TOL, maxiter: int = 500) -> Field:
    """Solve P_g u = f.

    Constant coefficients divide by the multiplier; general coefficients run
    conjugate gradients preconditioned by the mean-coefficient operator.
    """
    if not spec.coercive:
        raise OperatorError("i* needs a coercive operator")
    if spec.is_constant:
        return f.apply_multiplier(lambda lam: 1.0 / spec.coeffs.multiplier(lam))
    model = spec.model
    shape = f.values.shape
    ref = spec.coeffs.reference()
    size = f.values.size

    def matvec(x):
        return _general_apply(spec.coeffs, TorusField(model, x.reshape(shape))).values.ravel()

    def precond(x):
        return TorusField(model, x.reshape(shape)).apply_multiplier(lambda lam: 1.0 / ref.multiplier(lam)).values.ravel()

    A = LinearOperator((size, size), matvec=matvec, dtype=float)
    M = LinearOperator((size, size), matvec=precond, dtype=float)
    rhs = f.values.ravel()
    x, info = cg(A, rhs, rtol=tol, atol=0.0, maxiter=maxiter, M=M)
    res = float(np.linalg.norm(matvec(x) - rhs) / max(np.linalg.norm(rhs), 1e-300))
    if info != 0 or res > 10 * tol:
        raise OperatorError(f"i* did not converge in {maxiter} iterations (relative residual {res:.3e})")
    return TorusField(model, x.reshape(shape))


# -- nonlinearity ------------------------------------------------------------

@dataclass(frozen=True)
class Nonlinearity:
    """f_eps(u) = |u|^{2*-2-eps} u together with its primitive and derivative."""

    n: int
    eps: float = 0.0

    def __post_init__(self):
        if self.n < 5:
            raise OperatorError("the critical nonlinearity needs n >= 5")
        if not 0.0 <= self.eps <= 0.1:
            raise OperatorError(f"eps = {self.eps} outside [0, 0.1]")

    @property
    def critical(self) -> float:
        return 2.0 * self.n / (self.n - 4)

    @property
    def power(self) -> float:
        """p = 2* - 1 - eps, so that f(u) = |u|^{p-1} u."""
        return self.critical - 1.0 - self.eps

    def f(self, u):
        u = np.asarray(u, dtype=float)
        return np.abs(u) ** (self.power - 1.0) * u

    def F(self, u):
        q = self.power + 1.0
        return np.abs(np.asarray(u, dtype=float)) ** q / q

    def fprime(self, u):
        return self.power * np.abs(np.asarray(u, dtype=float)) ** (self.power - 1.0)


def nonlinearity_eval(nl: Nonlinearity, u: Field, which: str = "f") -> Field:
    funcs = {"f": nl.f, "F": nl.F, "f'": nl.fprime, "fprime": nl.fprime}
    if which not in funcs:
        raise ValueError(f"unknown nonlinearity component {which!r}")
    return u.map(funcs[which])


# -- background solution and certificates ------------------------------------

def _potential_constant(spec: OperatorSpec) -> float:
    if spec.is_constant:
        return spec.c
    h = spec.coeffs.h.values
    if np.ptp(h) > 1e-12 * max(1.0, np.max(np.abs(h))):
        raise OperatorError("constant u0 requires a constant potential h")
    return float(h.flat[0])


def constant_u0_value(spec: OperatorSpec) -> float:
    c = _potential_constant(spec)
    if c <= 0:
        raise OperatorError("a positive constant solution needs a positive potential")
    return float(c ** ((spec.n - 4) / 8.0))


def constant_u0(spec: OperatorSpec) -> Field:
    """u0 = c^{(n-4)/8}, the constant positive solution of P_g u = u^{2*-1}."""
    return constant_field(spec.model, constant_u0_value(spec))


def resolved_eigenvalues(model: ManifoldModel) -> np.ndarray:
    """Distinct Laplace eigenvalues carried by the model's spectral grid."""
    N = model.resolution
    if model.kind == SPHERE:
        k = np.arange(N)
        return k * (k + model.n - 1.0)
    half = N // 2
    squares = np.arange(half + 1) ** 2
    reachable = {0}
    for _ in range(model.n):
        reachable = {s + q for s in reachable for q in squares}
    return np.array(sorted(reachable), dtype=float)


def _inverse_power(solve, shape, iters: int = 30, seed: int = 0) -> float:
    """Smallest |eigenvalue| of a symmetric operator, given a solver for it."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    growth = 0.0
    for _ in range(iters):
        y = solve(x)
        growth = float(np.linalg.norm(y))
        if growth == 0.0:
            return np.inf
        x = y / growth
    return 1.0 / growth


def nondegeneracy_check(spec: OperatorSpec, u0: Field | float | None = None,
                        tol: float = LINEARIZATION_TOL, raise_on_failure: bool = True) -> dict:
    """Smallest |multiplier| of P_g - (2*-1) u0^{2*-2} over the resolved spectrum."""
    n = spec.n
    if u0 is None:
        u0 = constant_u0_value(spec)
    u0 = float(np.mean(u0.values)) if isinstance(u0, Field) else float(u0)
    shift = (2.0 * n / (n - 4) - 1.0) * abs(u0) ** (8.0 / (n - 4))
    if spec.is_constant:
        lam = resolved_eigenvalues(spec.model)
        vals = np.abs(spec.coeffs.multiplier(lam) - shift)
        k = int(np.argmin(vals))
        mode = k if spec.model.kind == SPHERE else int(lam[k])
        out = {"min_abs_multiplier": float(vals[k]), "mode": mode, "eigenvalue": float(lam[k]),
               "degenerate": bool(vals[k] <= tol)}
    else:
        model = spec.model
        shape = constant_field(model, 0.0).values.shape
        size = int(np.prod(shape))

        def lin(x):
            return (_general_apply(spec.coeffs, TorusField(model, x.reshape(shape))).values - shift * x.reshape(shape)).ravel()

        A = LinearOperator((size, size), matvec=lin, dtype=float)
        ref = spec.coeffs.reference()
        floor = 0.1 * max(shift, 1.0)

        def precond(x):
            return TorusField(model, x.reshape(shape)).apply_multiplier(
                lambda lam: 1.0 / np.maximum(np.abs(ref.multiplier(lam) - shift), floor)).values.ravel()

        M = LinearOperator((size, size), matvec=precond, dtype=float)

        def inv(x):
            y, _ = minres(A, x.ravel(), rtol=1e-8, maxiter=500, M=M)
            return y.reshape(shape)

        sigma = _inverse_power(inv, shape, iters=15)
        out = {"min_abs_multiplier": float(sigma), "mode": None, "eigenvalue": None,
               "degenerate": bool(sigma <= tol)}
    if out["degenerate"] and raise_on_failure:
        raise DegenerateError(
            f"u0 is degenerate: linearized multiplier {out['min_abs_multiplier']:.3e} at mode {out['mode']}",
            out["mode"], out["min_abs_multiplier"])
    return out


def coercivity_check(spec: OperatorSpec, probes: int = 64, seed: int = 0) -> tuple[bool, float]:
    """(coercive?, worst multiplier or Rayleigh quotient)."""
    model = spec.model
    if spec.is_constant:
        m = spec.coeffs
        lam = resolved_eigenvalues(model)
        worst = float(np.min(m.multiplier(lam)))
        # beyond the grid m is increasing once lam passes the vertex -b/2
        tail_ok = -m.b / 2.0 <= lam[-1]
        return bool(worst > 0 and tail_ok), worst
    rng = np.random.default_rng(seed)
    worst = np.inf
    shape = constant_field(model, 0.0).values.shape
    for _ in range(probes):
        u = TorusField(model, rng.standard_normal(shape))
        u = u.apply_multiplier(lambda lam: 1.0 / (1.0 + lam) ** 2)
        q = apply_pg(spec, u).l2_inner(u) / u.l2_inner(u)
        worst = min(worst, q)
    ref = spec.coeffs.reference()

    def precond_inverse(x):
        y, _ = cg(LinearOperator((x.size, x.size), dtype=float,
                                 matvec=lambda z: _general_apply(spec.coeffs, TorusField(model, z.reshape(shape))).values.ravel()),
                  x.ravel(), rtol=1e-6, maxiter=200,
                  M=LinearOperator((x.size, x.size), dtype=float,
                                   matvec=lambda z: TorusField(model, z.reshape(shape)).apply_multiplier(
                                       lambda lam: 1.0 / ref.multiplier(lam)).values.ravel()))
        return y.reshape(shape)

    if worst > 0:
        worst = min(worst, _inverse_power(precond_inverse, shape, iters=10, seed=seed + 1))
    return bool(worst > 0), float(worst)


__all__ = [
    "OperatorError",
    "DegenerateError",
    "paneitz_tensor",
    "q_curvature",
    "einstein_coefficients",
    "ConstantCoeff",
    "GeneralCoeff",
    "OperatorSpec",
    "constant_spec",
    "general_spec",
    "apply_pg",
    "pg_inner",
    "pg_norm",
    "istar",
    "Nonlinearity",
    "nonlinearity_eval",
    "constant_u0",
    "constant_u0_value",
    "resolved_eigenvalues",
    "nondegeneracy_check",
    "coercivity_check",
]
