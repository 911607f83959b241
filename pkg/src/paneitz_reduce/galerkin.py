"""Graded Galerkin space for the reduction.

A bubble of width delta = 1e-8 cannot live on any uniform grid, so the
reduction works in a space built around the bubble centre xi:

* radial quintic B-splines on knots graded like delta sinh(kappa s) over a
  ball of radius R about xi (the whole sphere in zonal mode);
* on the torus, cosine "orbit" functions
  Phi_k(x) = sum over distinct permutations of prod_i cos(k_i (x_i - xi_i)),
  which span the functions invariant under coordinate permutations and
  reflections about xi (the symmetry group of u0, W and a constant-coefficient
  operator), and carry the smooth far field.

Inside the ball, every field is represented by its spherical mean about xi.
Constant-coefficient operators commute with spherical means, so the P_g
pairings are exact; the nonlinear terms use the mean of u, which is the
controlled approximation of this space (the non-radial part is the smooth
Fourier tail, whose anisotropy across the ball is small).

The raw basis is orthonormalised in the P_g inner product, so coefficient
vectors can be treated as points of a Euclidean space: the P_g norm of a
field is the 2-norm of its coefficients.
"""

from __future__ import annotations

from collections import Counter
from itertools import combinations_with_replacement
from math import factorial

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import null_space
from scipy.special import gammaln, jv

from .geometry import SPHERE, TORUS, graded_breakpoints, graded_radial_rule, radial_mu


class GalerkinError(ArithmeticError):
    pass


def spherical_mean_profile(n: int, s) -> np.ndarray:
    """Lambda_n(s): spherical mean of exp(i k.x) over |x| = r, with s = |k| r."""
    nu = n / 2.0 - 1.0
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    big = s > 1e-3
    out[big] = np.exp(gammaln(n / 2.0)) * (2.0 / s[big]) ** nu * jv(nu, s[big])
    small = s[~big] ** 2
    out[~big] = 1.0 - small / (2.0 * n) + small * small / (8.0 * n * (n + 2))
    return out


def cosine_orbits(n: int, K: int) -> list[tuple[tuple[int, ...], int]]:
    """Sorted wave vectors k in {0..K}^n with the number of their distinct permutations."""
    out = []
    for combo in combinations_with_replacement(range(K + 1), n):
        k = tuple(sorted(combo, reverse=True))
        perms = factorial(n)
        for mult in Counter(k).values():
            perms //= factorial(mult)
        out.append((k, perms))
    return out


class RadialSplines:
    """Quintic B-splines in the geodesic radius with boundary conditions built in.

    Conditions are imposed as linear constraints on the spline coefficients:
    u' = u''' = 0 at the centre (and at the antipode of the sphere) so every
    basis function is smooth there, and, for a ball inside the torus,
    u = u' = u'' = u''' = 0 at the rim so that extension by zero stays C^3.
    """

    degree = 5

    def __init__(self, kind: str, n: int, delta: float, R: float, panels: int, q: int = 10,
                 breakpoints=()):
        self.kind, self.n, self.R = kind, n, float(R)
        p = self.degree
        knots = graded_breakpoints(delta, R, panels)
        self.knots = np.r_[[0.0] * p, knots, [R] * p]
        count = len(self.knots) - p - 1
        self.r, self.wt = graded_radial_rule(kind, n, delta, R, panels, q, breakpoints)
        self._spline = BSpline(self.knots, np.eye(count), p)
        rows = [self._spline(0.0, 1), self._spline(0.0, 3)]
        if kind == SPHERE:
            rows += [self._spline(R, 1), self._spline(R, 3)]
        else:
            rows += [self._spline(R, d) for d in range(4)]
        self.constraint = null_space(np.array(rows))
        self.size = self.constraint.shape[1]
        self.mu = radial_mu(kind, n, self.r)[0]

    def derivatives(self, r=None, order: int = 2) -> list[np.ndarray]:
        """Basis values and derivatives up to ``order`` at r (default: quadrature nodes)."""
        r = self.r if r is None else np.asarray(r, dtype=float)
        return [self._spline(r, d) @ self.constraint for d in range(order + 1)]

    def laplacian(self, d: list[np.ndarray]) -> np.ndarray:
        return -(d[2] + self.mu[:, None] * d[1])


class GalerkinSpace:
    """P_g-orthonormal basis of the reduction space about a bubble of width delta.

    Parameters: ``b``, ``h`` are the constant coefficients of P_g; ``R`` the
    radius of the radial ball (pi on the sphere); ``panels`` the number of
    graded knot intervals; ``K`` the highest torus wave number per axis.
    """

    def __init__(self, kind: str, n: int, delta: float, b: float, h: float, R: float, panels: int,
                 K: int = 0, r0: float = np.pi / 4, q: int = 10):
        if kind == TORUS and K < 1:
            raise GalerkinError("the torus space needs Fourier modes (K >= 1)")
        self.kind, self.n, self.b, self.h = kind, n, float(b), float(h)
        self.delta, self.R = float(delta), float(R)
        rad = RadialSplines(kind, n, delta, R, panels, q, breakpoints=(r0 / 2.0, r0))
        self.radial = rad
        self.r, self.wt = rad.r, rad.wt
        d = rad.derivatives()
        self.B = d
        lap = rad.laplacian(d)
        wt = self.wt[:, None]
        gram_rr = lap.T @ (wt * lap) + b * d[1].T @ (wt * d[1]) + h * d[0].T @ (wt * d[0])
        mass_rr = d[0].T @ (wt * d[0])
        self.n_radial = rad.size
        if kind == TORUS:
            orbits = cosine_orbits(n, K)
            self.K = K
            self.orbit_keys = [k for k, _ in orbits]
            self.orbit_perms = np.array([p for _, p in orbits], dtype=float)
            knorm = np.sqrt([sum(x * x for x in k) for k in self.orbit_keys])
            zeros = np.array([sum(1 for x in k if x == 0) for k in self.orbit_keys])
            self.wavenumber2 = knorm**2
            self.multiplier = knorm**4 + b * knorm**2 + h
            # int prod cos^2 over the torus, times the number of permutations
            self.orbit_mass = self.orbit_perms * (2.0 * np.pi) ** n / 2.0 ** (n - zeros)
            self.Fm = self.orbit_perms[None, :] * spherical_mean_profile(n, knorm[None, :] * self.r[:, None])
            mass_rf = d[0].T @ (wt * self.Fm)
            gram = np.block([[gram_rr, mass_rf * self.multiplier[None, :]],
                             [(mass_rf * self.multiplier[None, :]).T, np.diag(self.multiplier * self.orbit_mass)]])
            mass = np.block([[mass_rr, mass_rf], [mass_rf.T, np.diag(self.orbit_mass)]])
            raw_values = np.hstack([d[0], self.Fm])
            self._setup_grid(4 * K)
        else:
            gram, mass, raw_values = gram_rr, mass_rr, d[0]
        scale = 1.0 / np.sqrt(np.diag(gram))
        ev, vec = np.linalg.eigh(scale[:, None] * gram * scale[None, :])
        keep = ev > 1e-13 * ev.max()
        self.dropped = int(np.count_nonzero(~keep))
        self.T = scale[:, None] * vec[:, keep] / np.sqrt(ev[keep])[None, :]
        self.dim = self.T.shape[1]
        self.E = raw_values @ self.T
        self.mass = self.T.T @ mass @ self.T
        self.TR = self.T[: self.n_radial]
        self.TF = self.T[self.n_radial:] if kind == TORUS else None

    # -- torus grid -----------------------------------------------------------
    def _setup_grid(self, N: int):
        """Reduced even grid: x_j = 2 pi j/N, j = 0..N/2, each covering +-x_j."""
        j = np.arange(N // 2 + 1)
        self.grid_axis = 2.0 * np.pi * j / N
        self.grid_weight = np.where((j == 0) | (j == N // 2), 1.0, 2.0) * (2.0 * np.pi / N)
        self.cos_table = np.cos(np.outer(self.grid_axis, np.arange(self.K + 1)))
        index = {k: i for i, k in enumerate(self.orbit_keys)}
        full = np.indices((self.K + 1,) * self.n).reshape(self.n, -1).T
        self._orbit_map = np.array([index[tuple(sorted(g, reverse=True))] for g in full]).reshape(
            (self.K + 1,) * self.n)

    def grid_eval(self, orbit_coeffs) -> np.ndarray:
        """Values of sum_k a_k Phi_k on the reduced grid."""
        X = np.asarray(orbit_coeffs)[self._orbit_map]
        for _ in range(self.n):
            X = np.tensordot(X, self.cos_table, axes=([0], [1]))
        return X

    def grid_project(self, g) -> np.ndarray:
        """(int g Phi_k dV)_k for a grid function g with the symmetry of the space."""
        X = g
        table = self.cos_table * self.grid_weight[:, None]
        for _ in range(self.n):
            X = np.tensordot(X, table, axes=([0], [0]))
        return np.array([X[k] for k in self.orbit_keys]) * self.orbit_perms

    def grid_integrate(self, g) -> float:
        X = g
        for _ in range(self.n):
            X = np.tensordot(X, self.grid_weight, axes=([0], [0]))
        return float(X)

    def grid_radius(self) -> np.ndarray:
        """Distance to xi at each reduced-grid point."""
        g = np.meshgrid(*([self.grid_axis**2] * self.n), indexing="ij", sparse=True)
        return np.sqrt(sum(g))

    # -- pairings with radial profiles ---------------------------------------
    def radial_laplacian(self, f: list[np.ndarray]) -> np.ndarray:
        return -(f[2] + self.radial.mu * f[1])

    def pair(self, f: list[np.ndarray]) -> np.ndarray:
        """<f, e_a>_{P_g} for a radial f supported in the ball, given (f, f', f'') at the nodes."""
        wt = self.wt
        d = self.B
        lap_f = self.radial_laplacian(f)
        lap_b = self.radial.laplacian(d)
        radial = lap_b.T @ (wt * lap_f) + self.b * d[1].T @ (wt * f[1]) + self.h * d[0].T @ (wt * f[0])
        if self.kind == TORUS:
            radial = np.r_[radial, self.multiplier * (self.Fm.T @ (wt * f[0]))]
        return self.T.T @ radial

    def pnorm2(self, f: list[np.ndarray]) -> float:
        lap_f = self.radial_laplacian(f)
        return float(np.sum(self.wt * (lap_f**2 + self.b * f[1] ** 2 + self.h * f[0] ** 2)))

    def integrals(self) -> np.ndarray:
        """(int e_a dV)_a."""
        radial = self.B[0].T @ self.wt
        if self.kind == TORUS:
            vol = (2.0 * np.pi) ** self.n
            radial = np.r_[radial, [vol if sum(k) == 0 else 0.0 for k in self.orbit_keys]]
        return self.T.T @ radial

    def volume(self) -> float:
        if self.kind == TORUS:
            return float((2.0 * np.pi) ** self.n)
        return float(np.sum(self.wt))

    # -- evaluation of a coefficient vector ----------------------------------
    def spline_derivatives(self, coeffs, r, order: int = 4) -> list[np.ndarray]:
        """Derivatives of the radial spline part of sum_a c_a e_a at radii r <= R."""
        cr = self.TR @ coeffs
        return [s @ cr for s in self.radial.derivatives(r, order)]

    def fourier_mean(self, coeffs, r, apply_operator: bool = False) -> np.ndarray:
        """Spherical mean about xi of the Fourier part (or of P_g applied to it)."""
        a = self.orbit_coefficients(coeffs)
        if apply_operator:
            a = a * self.multiplier
        r = np.asarray(r, dtype=float)
        prof = self.orbit_perms[None, :] * spherical_mean_profile(
            self.n, np.sqrt(self.wavenumber2)[None, :] * r.ravel()[:, None])
        return (prof @ a).reshape(r.shape)

    def orbit_coefficients(self, coeffs) -> np.ndarray:
        if self.kind != TORUS:
            raise GalerkinError("orbit coefficients only exist on the torus")
        return self.TF @ coeffs
