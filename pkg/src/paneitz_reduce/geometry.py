"""Model manifolds: the round unit sphere in zonal mode and the flat torus.

Both models are homogeneous, so charts, volume elements and curvature data
are available in closed form.  Two kinds of quadrature live here: the
spectral rules behind :mod:`paneitz_reduce.fields`, and composite radial
rules on panels graded towards the bubble centre, which the reduction uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.special import gammaln, roots_jacobi

SPHERE = "sphere"
TORUS = "torus"

_KIND_ALIASES = {
    "sphere": SPHERE,
    "spherezonal": SPHERE,
    "sphere_zonal": SPHERE,
    "zonal": SPHERE,
    "torus": TORUS,
}


class GeometryError(ValueError):
    """Raised for points or parameters outside a model's domain."""


def sphere_volume(n: int) -> float:
    """Volume omega_n of the unit n-sphere S^n in R^{n+1}."""
    if n < 1:
        raise GeometryError(f"sphere_volume needs n >= 1, got {n}")
    return float(2.0 * np.exp((n + 1) / 2 * np.log(np.pi) - gammaln((n + 1) / 2)))


@dataclass(frozen=True)
class ManifoldModel:
    """A model manifold.

    ``resolution`` is the number of Gauss nodes in the geodesic radius for the
    zonal sphere and the number of grid points per axis for the torus.
    Dimensions below 5 are only accepted with ``debug=True`` (quadrature
    sanity checks on S^2 and the like).
    """

    kind: str
    n: int
    resolution: int = 64
    debug: bool = False

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise GeometryError(f"unknown manifold kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.n < 5 and not self.debug:
            raise GeometryError(f"dimension n = {self.n} < 5 is outside the model")
        if self.n < 1:
            raise GeometryError("dimension must be positive")
        if self.resolution < 2:
            raise GeometryError("resolution must be at least 2")
        if kind == TORUS and self.resolution % 2:
            raise GeometryError("torus resolution must be even")

    @property
    def r_inj(self) -> float:
        return float(np.pi)

    @property
    def volume(self) -> float:
        if self.kind == SPHERE:
            return sphere_volume(self.n)
        return float((2.0 * np.pi) ** self.n)

    @property
    def scalar_curvature(self) -> float:
        return float(self.n * (self.n - 1)) if self.kind == SPHERE else 0.0

    @property
    def ricci_constant(self) -> float:
        """Einstein constant lambda with Ric = lambda g."""
        return float(self.n - 1) if self.kind == SPHERE else 0.0

    @property
    def ricci_norm2(self) -> float:
        """|Ric|^2 for the Einstein metric: n lambda^2."""
        return self.n * self.ricci_constant**2

    def default_r0(self) -> float:
        return self.r_inj / 4.0

    def default_pole(self) -> np.ndarray:
        if self.kind == SPHERE:
            p = np.zeros(self.n + 1)
            p[0] = 1.0
            return p
        return np.zeros(self.n)


def radial_mu(kind: str, n: int, r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficient mu of the radial Laplacian and its first two derivatives.

    For a radial function, Delta u = -(u'' + mu u') with mu = (n-1)/r in flat
    space and (n-1) cot r on the unit sphere (geometers' sign convention).
    """
    r = np.asarray(r, dtype=float)
    if kind == SPHERE:
        s, c = np.sin(r), np.cos(r)
        mu = (n - 1) * c / s
        mu1 = -(n - 1) / s**2
        mu2 = 2.0 * (n - 1) * c / s**3
    else:
        mu = (n - 1) / r
        mu1 = -(n - 1) / r**2
        mu2 = 2.0 * (n - 1) / r**3
    return mu, mu1, mu2


def radial_density(kind: str, n: int, r: np.ndarray) -> np.ndarray:
    """Volume element per unit radius: omega_{n-1} sin^{n-1} r or omega_{n-1} r^{n-1}."""
    r = np.asarray(r, dtype=float)
    base = np.sin(r) if kind == SPHERE else r
    return sphere_volume(n - 1) * base ** (n - 1)


class NormalChart:
    """Normal coordinates centred at a point xi.

    Sphere points live on the unit sphere in R^{n+1}; torus points are
    coordinate vectors in [0, 2 pi)^n.  Normal coordinates are vectors in R^n.
    """

    def __init__(self, model: ManifoldModel, xi=None):
        self.model = model
        n = model.n
        if xi is None:
            xi = model.default_pole()
        xi = np.asarray(xi, dtype=float)
        if model.kind == SPHERE:
            if xi.shape != (n + 1,) or abs(np.linalg.norm(xi) - 1.0) > 1e-12:
                raise GeometryError("sphere point must be a unit vector in R^{n+1}")
            # orthonormal frame of the tangent space at xi
            self._frame = null_space(xi[None, :])
        else:
            if xi.shape != (n,):
                raise GeometryError("torus point must be a vector in R^n")
            xi = np.mod(xi, 2.0 * np.pi)
        self.xi = xi

    def exp(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.model.kind == TORUS:
            return np.mod(self.xi + v, 2.0 * np.pi)
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        sinc = np.where(r > 0, np.sin(r) / np.where(r > 0, r, 1.0), 1.0)
        return np.cos(r) * self.xi + sinc * (v @ self._frame.T)

    def log(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.model.kind == TORUS:
            d = np.mod(x - self.xi + np.pi, 2.0 * np.pi) - np.pi
            if np.any(np.linalg.norm(d, axis=-1) >= self.model.r_inj):
                raise GeometryError("point outside the injectivity radius")
            return d
        cos_r = np.clip(x @ self.xi, -1.0, 1.0)
        r = np.arccos(cos_r)
        if np.any(r >= self.model.r_inj - 1e-12):
            raise GeometryError("antipodal point: log undefined")
        tangent = (x - np.multiply.outer(cos_r, self.xi)) @ self._frame
        norm = np.linalg.norm(tangent, axis=-1, keepdims=True)
        scale = np.where(norm > 0, np.expand_dims(r, -1) / np.where(norm > 0, norm, 1.0), 0.0)
        return tangent * scale

    def dist(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.model.kind == TORUS:
            d = np.mod(x - self.xi + np.pi, 2.0 * np.pi) - np.pi
            return np.linalg.norm(d, axis=-1)
        return np.arccos(np.clip(x @ self.xi, -1.0, 1.0))

    def density(self, v) -> np.ndarray:
        """sqrt|g| in normal coordinates v."""
        v = np.asarray(v, dtype=float)
        r = np.linalg.norm(v, axis=-1)
        if self.model.kind == TORUS:
            return np.ones_like(r)
        return np.where(r > 0, np.sin(r) / np.where(r > 0, r, 1.0), 1.0) ** (self.model.n - 1)


def normal_chart(model: ManifoldModel, xi=None) -> NormalChart:
    return NormalChart(model, xi)


def cartan_check(model: ManifoldModel, xi=None, radius: float = 0.1, samples: int = 2000, seed: int = 0) -> float:
    """Max deviation of the chart density from 1 - Ric(x, x)/6 on |x| <= radius."""
    if radius >= model.r_inj / 2:
        raise GeometryError("cartan_check radius must be below r_inj/2")
    chart = normal_chart(model, xi)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, model.n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    # include the boundary sphere, where the deviation peaks
    radii = radius * np.r_[np.ones(samples // 4), rng.random(samples - samples // 4)]
    x = dirs * radii[:, None]
    comparator = 1.0 - model.ricci_constant * np.sum(x * x, axis=1) / 6.0
    return float(np.max(np.abs(chart.density(x) - comparator)))


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and volume weights.

    Zonal sphere: ``nodes`` are geodesic radii and ``weights`` include the
    surface measure.  Torus: ``nodes`` is the 1-D axis of the product grid and
    ``weights`` the single (uniform) cell volume, broadcast over the grid.
    """

    kind: str
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    grid_shape: tuple[int, ...] = field(default=())

    def total_weight(self) -> float:
        if self.kind == TORUS:
            return float(self.weights) * float(np.prod(self.grid_shape))
        return float(np.sum(self.weights))

    def min_spacing_near_centre(self) -> float:
        """Node spacing in geodesic radius around the chart centre."""
        if self.kind == TORUS:
            return float(self.nodes[1] - self.nodes[0])
        r = np.sort(self.nodes)
        return float(np.max(np.diff(np.r_[0.0, r[:4]])))


def quadrature(model: ManifoldModel) -> QuadratureRule:
    n, N = model.n, model.resolution
    if model.kind == SPHERE:
        a = (n - 2) / 2.0
        x, w = roots_jacobi(N, a, a)
        order = np.argsort(-x)  # increasing radius
        x, w = x[order], w[order]
        return QuadratureRule(SPHERE, n, np.arccos(x), w * sphere_volume(n - 1))
    axis = 2.0 * np.pi * np.arange(N) / N
    return QuadratureRule(TORUS, n, axis, np.asarray((2.0 * np.pi / N) ** n), (N,) * n)


def integrate(rule: QuadratureRule, values) -> float:
    """Integrate nodal values (array, Field, or callable of the radius/grid)."""
    if hasattr(values, "values"):
        values = values.values
    elif callable(values):
        if rule.kind == SPHERE:
            values = values(rule.nodes)
        else:
            grids = np.meshgrid(*([rule.nodes] * rule.n), indexing="ij", sparse=True)
            values = values(*grids)
    values = np.asarray(values, dtype=float)
    if rule.kind == TORUS:
        return float(rule.weights) * float(np.sum(np.broadcast_to(values, rule.grid_shape)))
    return float(np.dot(rule.weights, values))


def require_resolved(rule: QuadratureRule, delta: float, per_delta: int = 4) -> None:
    """Refuse a bubble scale that the spectral grid cannot hold."""
    h = rule.min_spacing_near_centre()
    if h > delta / per_delta:
        raise GeometryError(
            f"quadrature spacing {h:.3g} near the centre cannot resolve delta = {delta:.3g} "
            f"(need at most delta/{per_delta}); raise the resolution or use the graded reduction space"
        )


def graded_breakpoints(delta: float, R: float, panels: int) -> np.ndarray:
    """Panel ends r_j = delta sinh(kappa j/panels) on [0, R], kappa = asinh(R/delta).

    Spacing is about delta kappa/panels near the centre and grows
    geometrically (ratio exp(kappa/panels)) further out.  The knots move
    smoothly with delta, so quantities built on them are smooth in delta.
    """
    if not 0 < delta < R:
        raise GeometryError("graded panels need 0 < delta < R")
    kappa = np.arcsinh(R / delta)
    pts = delta * np.sinh(kappa * np.linspace(0.0, 1.0, panels + 1))
    pts[0], pts[-1] = 0.0, R
    return pts


def graded_radial_rule(kind: str, n: int, delta: float, R: float, panels: int, q: int = 10,
                       breakpoints=()) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on graded panels of [0, R] with volume weights.

    Returns radii and weights that already include the radial volume element
    (omega_{n-1} r^{n-1} flat, omega_{n-1} sin^{n-1} r on the sphere).
    """
    edges = graded_breakpoints(delta, R, panels)
    extra = [b for b in breakpoints if 0.0 < b < R]
    edges = np.unique(np.r_[edges, extra])
    x, w = np.polynomial.legendre.leggauss(q)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    r = (half[:, None] * (x[None, :] + 1.0) + a[:, None]).ravel()
    wr = (half[:, None] * w[None, :]).ravel()
    return r, wr * radial_density(kind, n, r)
