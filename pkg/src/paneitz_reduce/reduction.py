"""Lyapunov-Schmidt reduction about u0 - W.

Everything is posed in a :class:`~paneitz_reduce.galerkin.GalerkinSpace`
whose basis is orthonormal for <.,.>_{P_g}.  A correction phi is therefore a
coefficient vector, its P_g norm is the Euclidean norm, and i* followed by a
projection becomes a plain coordinate map:

    (i* g)_a = int g e_a dV.

The approximate kernel K is spanned by Z_0.  (On the torus the remaining Z_i
are odd under a reflection about xi while the whole problem is even, so their
pairings vanish identically; on the zonal sphere they vanish by rotation
symmetry.)  Its orthogonal complement is taken with respect to the exact
pairings z_a = <Z_0, e_a>_{P_g}, so <phi, Z_0>_{P_g} = z . phi holds exactly
for every phi in the space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh
from scipy.sparse.linalg import LinearOperator, minres

from ._jets import Jet
from .bubble import BubbleChart, ScaleLaw, delta_of_t, radial_bilaplacian, transplant, w_jet, z0_jet
from .galerkin import GalerkinSpace
from .geometry import SPHERE, TORUS, ManifoldModel
from .operator import Nonlinearity, OperatorError, OperatorSpec, constant_u0_value, nondegeneracy_check

FIXED_POINT_RTOL = 1e-8
FIXED_POINT_ATOL = 1e-10
SOLVE_TOL = 1e-10


class ReductionError(ArithmeticError):
    """Contraction failure, ball violation or a failed linear solve."""


@dataclass(frozen=True)
class Discretization:
    """Resolution of the reduction space.

    ``panels`` graded knot intervals in the radial ball, ``quad`` Gauss points
    per interval, ``K`` the highest torus wave number per axis and ``rho`` the
    radius of the torus ball that carries the radial splines.
    """

    panels: int = 200
    quad: int = 10
    K: int = 6
    rho: float = 2.5


@dataclass
class ReductionProblem:
    """Operator, background and scale law shared by all (eps, t) states."""

    spec: OperatorSpec
    law: ScaleLaw
    r0: float | None = None
    disc: Discretization = field(default_factory=Discretization)
    gamma: float = 10.0

    def __post_init__(self):
        if not self.spec.is_constant:
            raise ReductionError("the reduction needs a constant-coefficient operator")
        if self.spec.n != self.law.n:
            raise ReductionError("scale law and operator disagree on the dimension")
        if not self.spec.coercive:
            raise OperatorError("P_g is not coercive")
        if self.r0 is None:
            self.r0 = self.model.default_r0()
        if self.model.kind == TORUS and not self.r0 < self.disc.rho < np.pi:
            raise ReductionError("the torus ball must satisfy r0 < rho < pi")
        self.u0 = constant_u0_value(self.spec)
        self.nondegeneracy = nondegeneracy_check(self.spec, self.u0)

    @property
    def model(self) -> ManifoldModel:
        return self.spec.model

    @property
    def n(self) -> int:
        return self.spec.n

    def space(self, delta: float) -> GalerkinSpace:
        d = self.disc
        if self.model.kind == SPHERE:
            return GalerkinSpace(SPHERE, self.n, delta, self.spec.b, self.spec.c, np.pi, d.panels,
                                 r0=self.r0, q=d.quad)
        return GalerkinSpace(TORUS, self.n, delta, self.spec.b, self.spec.c, d.rho, d.panels,
                             K=d.K, r0=self.r0, q=d.quad)

    def state(self, eps: float, t: float | None = None, delta: float | None = None,
              bubble: bool = True) -> "ReductionState":
        if delta is None:
            if t is None:
                raise ReductionError("give either t or delta")
            delta = delta_of_t(self.law, eps, t)
        return ReductionState(self, eps, delta, t, bubble)


class ReductionState:
    """Reduction data at one (eps, delta): R, L, N, the Picard solve and diagnostics.

    With ``bubble=False`` the ansatz is u0 alone (W = 0) while Z_0 still
    defines the constraint; this is the exactly solvable synthetic case.
    """

    def __init__(self, problem: ReductionProblem, eps: float, delta: float, t: float | None = None,
                 bubble: bool = True):
        self.problem = problem
        self.eps, self.delta, self.t = float(eps), float(delta), t
        self.bubble = bubble
        self.nl = Nonlinearity(problem.n, eps)
        self.chart: BubbleChart = transplant(problem.model, delta, r0=problem.r0, sample=False)
        sp = problem.space(delta)
        self.space = sp
        n, u0, h = problem.n, problem.u0, problem.spec.c
        r = sp.r
        wj = w_jet(n, delta, problem.r0, Jet.variable(r, 2))
        zj = z0_jet(n, delta, problem.r0, Jet.variable(r, 2))
        w_d = wj.derivatives() if bubble else [np.zeros_like(r)] * 3
        z_d = zj.derivatives()
        self.W = w_d[0]
        self.Z0 = z_d[0]
        self.z = sp.pair(z_d)
        self.gram = np.array([[sp.pnorm2(z_d)]])
        self.zhat = self.z / np.linalg.norm(self.z)
        pair_w = sp.pair(w_d)
        self.lin = h * u0 * sp.integrals() - pair_w
        self.base_norm2 = h * u0 * u0 * sp.volume() - 2.0 * h * u0 * np.sum(sp.wt * self.W) + sp.pnorm2(w_d)
        self.pair_wz = float(np.sum(sp.wt * (sp.radial_laplacian(w_d) * sp.radial_laplacian(z_d)
                                             + problem.spec.b * w_d[1] * z_d[1] + h * w_d[0] * z_d[0])))
        self.ansatz = u0 - self.W
        fp = self.nl.fprime(self.ansatz)
        if sp.kind == TORUS:
            fp0 = float(self.nl.fprime(u0))
            self.Mp = fp0 * sp.mass + sp.E.T @ ((sp.wt * (fp - fp0))[:, None] * sp.E)
        else:
            self.Mp = sp.E.T @ ((sp.wt * fp)[:, None] * sp.E)
        dim = sp.dim
        P = np.eye(dim) - np.outer(self.zhat, self.zhat)
        # L extended to the whole space: identity on the Z_0 direction
        self.L = P @ (np.eye(dim) - self.Mp) @ P + np.outer(self.zhat, self.zhat)
        self.f0 = self.fvec(np.zeros(dim), self.nl.f)
        self.R = self.perp(self.f0 - self.lin)
        self.phi = None
        self.diagnostics: dict = {"gram_cond": float(np.linalg.cond(self.gram)), "dim": dim,
                                  "dropped_modes": sp.dropped}

    # -- projections ----------------------------------------------------------
    def perp(self, c) -> np.ndarray:
        return c - self.zhat * (self.zhat @ c)

    def project(self, c) -> tuple[np.ndarray, np.ndarray]:
        """(Pi c, Pi_perp c) for the P_g-orthogonal splitting along Z_0."""
        par = self.zhat * (self.zhat @ c)
        return par, c - par

    def constraint_violation(self, c) -> float:
        """|<phi, Z_0>_{P_g}| / (||phi|| ||Z_0||)."""
        nc = np.linalg.norm(c)
        if nc == 0:
            return 0.0
        return float(abs(self.z @ c) / (nc * np.sqrt(self.gram[0, 0])))

    # -- nonlinear terms ------------------------------------------------------
    def _values(self, c):
        """Mean field in the ball and, on the torus, the far-field pieces."""
        sp = self.space
        u0 = self.problem.u0
        ubar = self.ansatz + sp.E @ c
        if sp.kind != TORUS:
            return ubar, None, None
        a = sp.orbit_coefficients(c)
        return ubar, u0 + sp.Fm @ a, u0 + sp.grid_eval(a)

    def fvec(self, c, G) -> np.ndarray:
        """(int G(u0 - W + phi) e_a dV)_a."""
        sp = self.space
        ubar, uout, grid = self._values(c)
        g = G(ubar)
        if sp.kind != TORUS:
            return sp.E.T @ (sp.wt * g)
        radial = sp.B[0].T @ (sp.wt * g)
        fourier = sp.grid_project(G(grid)) + sp.Fm.T @ (sp.wt * (g - G(uout)))
        return sp.T.T @ np.r_[radial, fourier]

    def integral_F(self, c) -> float:
        sp = self.space
        ubar, uout, grid = self._values(c)
        F = self.nl.F
        if sp.kind != TORUS:
            return float(np.sum(sp.wt * F(ubar)))
        return sp.grid_integrate(F(grid)) + float(np.sum(sp.wt * (F(ubar) - F(uout))))

    # -- the three maps ----------------------------------------------------------
    def residual_R(self) -> tuple[np.ndarray, float]:
        """R = Pi_perp(i* f(u0 - W) - (u0 - W)) and its P_g norm."""
        return self.R, float(np.linalg.norm(self.R))

    def apply_L(self, c) -> np.ndarray:
        c = self.perp(c)
        return self.perp(c - self.Mp @ c)

    def solve_L(self, rhs, tol: float = SOLVE_TOL, maxiter: int = 1000, restarts: int = 4) -> np.ndarray:
        """Solve L phi = rhs on K_perp by restarted MINRES (L is symmetric).

        Each restart solves for the normalised current residual, which
        recovers the accuracy a single MINRES run loses to rounding and to
        badly scaled right-hand sides.  The accepted relative residual is 10 tol.
        """
        rhs = self.perp(np.asarray(rhs, dtype=float))
        nr = np.linalg.norm(rhs)
        if nr == 0:
            return np.zeros_like(rhs)
        op = LinearOperator(self.L.shape, matvec=lambda x: self.L @ x, dtype=float)
        x = np.zeros_like(rhs)
        res = 1.0
        for _ in range(restarts):
            r = rhs - self.L @ x
            nrm = np.linalg.norm(r)
            if nrm == 0:
                break
            # MINRES's stopping test misjudges very large right-hand sides, so solve for r / |r|
            dx, _ = minres(op, r / nrm, rtol=tol * 0.1 * nr / nrm, maxiter=maxiter)
            x = x + nrm * dx
            res = np.linalg.norm(self.L @ x - rhs) / nr
            if res <= tol:
                break
        if res > 10 * tol:
            raise ReductionError(
                f"L solve failed after {restarts} MINRES restarts (residual {res:.2e}, "
                f"smallest |L| eigenvalue {self.invertibility():.3e})")
        return self.perp(x)

    def invertibility(self) -> float:
        """min ||L phi|| / ||phi|| over K_perp (smallest |eigenvalue| of the symmetric L)."""
        if "inv_bound" not in self.diagnostics:
            self.diagnostics["inv_bound"] = float(np.min(np.abs(eigvalsh(self.L))))
        return self.diagnostics["inv_bound"]

    def nonlinear_N(self, c) -> np.ndarray:
        """Pi_perp i*(f(u0-W+phi) - f(u0-W) - f'(u0-W) phi)."""
        return self.perp(self.fvec(c, self.nl.f) - self.f0 - self.Mp @ c)

    # -- Picard ------------------------------------------------------------------
    def solve_phi(self, c0=None, maxiter: int = 100, gamma: float | None = None) -> np.ndarray:
        """Fixed point phi = L^{-1}(N(phi) + R) by Picard iteration from c0 (default 0)."""
        gamma = self.problem.gamma if gamma is None else gamma
        c = np.zeros(self.space.dim) if c0 is None else self.perp(np.asarray(c0, dtype=float))
        steps = []
        slow = 0
        converged = False
        for _ in range(maxiter):
            new = self.solve_L(self.nonlinear_N(c) + self.R)
            step = float(np.linalg.norm(new - c))
            if steps:
                slow = slow + 1 if step >= 0.9 * steps[-1] else 0
            steps.append(step)
            c = new
            if step <= FIXED_POINT_ATOL + FIXED_POINT_RTOL * np.linalg.norm(c):
                converged = True
                break
            if slow >= 5 or not np.isfinite(step):
                raise ReductionError(f"Picard iteration is not contracting at eps = {self.eps:g}; use a smaller eps")
        if not converged:
            raise ReductionError(f"Picard iteration did not converge in {maxiter} steps")
        norm_r = float(np.linalg.norm(self.R))
        norm_phi = float(np.linalg.norm(c))
        if norm_phi > gamma * norm_r + FIXED_POINT_ATOL:
            raise ReductionError(f"||phi|| = {norm_phi:.3e} leaves the ball of radius {gamma} ||R|| = {gamma * norm_r:.3e}")
        ratios = [steps[i + 1] / steps[i] for i in range(len(steps) - 1) if steps[i] > 0]
        self.phi = c
        self.diagnostics.update({
            "norm_R": norm_r,
            "norm_phi": norm_phi,
            "iterations": len(steps),
            "steps": steps,
            "contraction": ratios,
            "res_fixed_point": steps[-1],
            "constraint_violation": self.constraint_violation(c),
            "gram_cond": float(np.linalg.cond(self.gram)),
            "nonlinear_regime": "n>=12" if self.problem.n >= 12 else "5<=n<12",
        })
        return c

    def equation_residual(self, c=None) -> float:
        """||Pi_perp(u - i* f(u))||_{P_g} for u = u0 - W + phi."""
        c = self.phi if c is None else c
        return float(np.linalg.norm(self.perp(self.lin + c - self.fvec(c, self.nl.f))))

    def uniqueness_probe(self, seed: int = 0, scale: float = 0.5) -> float:
        """Restart Picard from a random point of the ball; distance to the stored phi.

        The direction is i*(zeta) for a random element zeta of the space
        (coordinates: mass matrix times a Gaussian vector).  White noise in the
        orthonormal coordinates would instead load the sub-bubble-scale
        splines and the near-null spline/Fourier combinations, whose
        nonlinear terms the torus grid cannot resolve.
        """
        if self.phi is None:
            self.solve_phi()
        rng = np.random.default_rng(seed)
        v = self.perp(self.space.mass @ rng.standard_normal(self.space.dim))
        v *= scale * self.problem.gamma * np.linalg.norm(self.R) / np.linalg.norm(v)
        keep, diag = self.phi, dict(self.diagnostics)
        other = self.solve_phi(c0=v)
        self.phi, self.diagnostics = keep, diag
        return float(np.linalg.norm(other - keep))

    # -- energies and multipliers ------------------------------------------------
    def energy(self, c=None) -> float:
        """J_eps(u0 - W + phi) = 1/2||u0-W||^2 + <u0-W, phi> + 1/2||phi||^2 - int F."""
        c = np.zeros(self.space.dim) if c is None else c
        return float(0.5 * self.base_norm2 + self.lin @ c + 0.5 * c @ c - self.integral_F(c))

    def lagrange_multiplier(self, c=None) -> float:
        """lambda with DJ(u) = lambda <Z_0, .>_{P_g}, evaluated on Z_0 itself."""
        c = self.phi if c is None else c
        sp = self.space
        u0, h = self.problem.u0, self.problem.spec.c
        ubar = self._values(c)[0]
        dj = (h * u0 * np.sum(sp.wt * self.Z0) - self.pair_wz + self.z @ c
              - np.sum(sp.wt * self.nl.f(ubar) * self.Z0))
        return float(dj / self.gram[0, 0])

    # -- strong residual ---------------------------------------------------------
    def strong_residual(self, c=None) -> float:
        """||P_g u - f(u)||_{L^{2n/(n+4)}} for u = u0 - W + phi.

        Inside the radial ball the residual of the spherical mean is used
        (exact for the linear part); outside it, on the torus, u = u0 plus
        the Fourier part and the residual is evaluated on the grid.
        """
        c = self.phi if c is None else c
        sp, prob = self.space, self.problem
        n, u0, b, h = prob.n, prob.u0, prob.spec.b, prob.spec.c
        q = 2.0 * n / (n + 4)
        r = sp.r
        kind = sp.kind
        if self.bubble:
            wd = w_jet(n, self.delta, prob.r0, Jet.variable(r, 4)).derivatives()
        else:
            wd = [np.zeros_like(r)] * 5
        sd = sp.spline_derivatives(c, r, 4)
        v = [sd[k] - wd[k] for k in range(5)]

        def apply_radial(d):
            lap = -(d[2] + sp.radial.mu * d[1])
            return radial_bilaplacian(kind, n, r, d) + b * lap + h * d[0]

        pu = h * u0 + apply_radial(v)
        ubar = u0 + v[0]
        if kind == TORUS:
            pu = pu + sp.fourier_mean(c, r, apply_operator=True)
            ubar = ubar + sp.fourier_mean(c, r)
        total = float(np.sum(sp.wt * np.abs(pu - self.nl.f(ubar)) ** q))
        if kind == TORUS:
            a = sp.orbit_coefficients(c)
            res = h * u0 + sp.grid_eval(a * sp.multiplier) - self.nl.f(u0 + sp.grid_eval(a))
            outside = sp.grid_radius() > sp.R
            total += sp.grid_integrate(np.where(outside, np.abs(res) ** q, 0.0))
        return total ** (1.0 / q)

    def centre_value(self, c=None) -> float:
        """u(xi) = u0 - W(xi) + phi(xi)."""
        c = self.phi if c is None else c
        sp = self.space
        val = self.problem.u0
        if self.bubble:
            val -= w_jet(self.problem.n, self.delta, self.problem.r0, Jet.variable(np.zeros(1), 0)).c[0, 0]
        val += sp.spline_derivatives(c, np.zeros(1), 0)[0][0]
        if sp.kind == TORUS:
            val += float(sp.orbit_coefficients(c) @ sp.orbit_perms)
        return float(val)

    def extremes(self, c=None) -> tuple[float, float]:
        """(min, max) of the mean-field u over the radial nodes and the far grid."""
        c = self.phi if c is None else c
        ubar, _, grid = self._values(c)
        vals = [ubar.min(), ubar.max(), self.centre_value(c)]
        if grid is not None:
            vals += [grid.min(), grid.max()]
        return float(min(vals)), float(max(vals))


# -- Taylor-inequality harness -----------------------------------------------

def _power_minus_one(x, theta):
    """|1 + x|^theta - 1 without cancellation for small x."""
    x = np.asarray(x, dtype=float)
    out = np.abs(1.0 + x) ** theta - 1.0
    safe = x > -0.5
    out[safe] = np.expm1(theta * np.log1p(x[safe]))
    return out


def _taylor_remainder(x, theta):
    """|1 + x|^theta (1 + x) - 1 - (1 + theta) x, with a series for small |x|."""
    x = np.asarray(x, dtype=float)
    out = np.abs(1.0 + x) ** theta * (1.0 + x) - 1.0 - (1.0 + theta) * x
    small = np.abs(x) < 1e-2
    xs = x[small]
    acc = np.zeros_like(xs)
    coef = 1.0
    a = theta + 1.0
    for k in range(1, 16):
        coef *= (a - k + 1) / k
        if k >= 2:
            acc += coef * xs**k
    out[small] = acc
    return out


def taylor_bound_check(theta: float, which: str = "dp1", samples: int = 20000, seed: int = 0,
                       decades: float = 12.0) -> float:
    """Largest observed |LHS| / envelope over random alpha > 0 and real beta.

    dp1: ||a+b|^t - a^t| against min(|b|^t, a^{t-1}|b|) for t <= 1 and
    a^{t-1}|b| + |b|^t for t > 1.  dp2: the first-order Taylor remainder of
    s |s|^t at a, against min or max of |b|^{t+1} and a^{t-1} b^2.  Both sides are
    homogeneous of the same degree, so the ratio is computed in x = b/a.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    rng = np.random.default_rng(seed)
    half = decades / 2.0
    alpha = 10.0 ** rng.uniform(-half, half, samples)
    beta = 10.0 ** rng.uniform(-half, half, samples) * rng.choice([-1.0, 1.0], samples)
    x = beta / alpha
    ax = np.abs(x)
    if which == "dp1":
        lhs = np.abs(_power_minus_one(x, theta))
        if theta <= 1:
            env = np.minimum(ax**theta, ax)
        else:
            env = ax + ax**theta
    elif which == "dp2":
        lhs = np.abs(_taylor_remainder(x, theta))
        pair = (ax ** (theta + 1.0), ax**2)
        env = np.minimum(*pair) if theta < 1 else np.maximum(*pair)
    else:
        raise ValueError(f"unknown inequality {which!r}")
    return float(np.max(lhs / env))
