"""Spectral fields on the model manifolds.

``ZonalField`` stores values at the Gauss-Jacobi radii of a zonal sphere model
and expands them in orthonormal zonal harmonics (Gegenbauer polynomials in
cos r).  ``TorusField`` stores values on the uniform product grid and uses the
FFT.  Both expose the same small algebra so operator code can treat them
alike.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import eval_gegenbauer

from .geometry import SPHERE, TORUS, ManifoldModel, QuadratureRule, integrate, quadrature


@lru_cache(maxsize=16)
def _zonal_basis(n: int, N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal zonal harmonics at the nodes, their norms and eigenvalues."""
    rule = quadrature(ManifoldModel(SPHERE, n, N, debug=True))
    lam = (n - 1) / 2.0
    x = np.cos(rule.nodes)
    k = np.arange(N)
    raw = eval_gegenbauer(k[None, :], lam, x[:, None])
    norms = np.sqrt(rule.weights @ raw**2)
    return raw / norms, norms, k * (k + n - 1.0)


@lru_cache(maxsize=16)
def _torus_wavenumbers(n: int, N: int) -> np.ndarray:
    k = np.fft.fftfreq(N, 1.0 / N)
    grids = np.meshgrid(*([k] * n), indexing="ij", sparse=True)
    return sum(g * g for g in grids)


class Field:
    """Common algebra.  Subclasses define the spectral transforms."""

    def __init__(self, model: ManifoldModel, values):
        self.model = model
        self.values = np.asarray(values, dtype=float)

    def _new(self, values) -> "Field":
        return type(self)(self.model, values)

    def _other(self, other):
        if isinstance(other, Field):
            if other.model != self.model:
                raise ValueError("fields live on different models")
            return other.values
        return other

    def __add__(self, other):
        return self._new(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._new(self.values - self._other(other))

    def __rsub__(self, other):
        return self._new(self._other(other) - self.values)

    def __mul__(self, other):
        return self._new(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._new(self.values / self._other(other))

    def __neg__(self):
        return self._new(-self.values)

    def map(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return self._new(func(self.values))

    @property
    def rule(self) -> QuadratureRule:
        return quadrature(self.model)

    def integrate(self) -> float:
        return integrate(self.rule, self.values)

    def lp_norm(self, p: float) -> float:
        return self.map(lambda v: np.abs(v) ** p).integrate() ** (1.0 / p)

    def l2_inner(self, other: "Field") -> float:
        return (self * other).integrate()

    # spectral interface
    def eigenvalues(self) -> np.ndarray:
        raise NotImplementedError

    def coefficients(self) -> np.ndarray:
        raise NotImplementedError

    def from_coefficients(self, coeffs) -> "Field":
        raise NotImplementedError

    def apply_multiplier(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        """Multiply spectral coefficients by func(lambda_k)."""
        return self.from_coefficients(func(self.eigenvalues()) * self.coefficients())


class ZonalField(Field):
    """Zonal function on S^n sampled at the Gauss-Jacobi radii."""

    def __init__(self, model: ManifoldModel, values):
        if model.kind != SPHERE:
            raise ValueError("ZonalField needs a sphere model")
        super().__init__(model, values)
        if self.values.shape != (model.resolution,):
            raise ValueError("ZonalField values must match the number of nodes")

    @classmethod
    def from_function(cls, model: ManifoldModel, func: Callable[[np.ndarray], np.ndarray]) -> "ZonalField":
        return cls(model, func(quadrature(model).nodes))

    @property
    def radii(self) -> np.ndarray:
        return self.rule.nodes

    def _basis(self):
        return _zonal_basis(self.model.n, self.model.resolution)

    def eigenvalues(self) -> np.ndarray:
        return self._basis()[2]

    def coefficients(self) -> np.ndarray:
        phi, _, _ = self._basis()
        return phi.T @ (self.rule.weights * self.values)

    def from_coefficients(self, coeffs) -> "ZonalField":
        phi, _, _ = self._basis()
        return ZonalField(self.model, phi @ np.asarray(coeffs, dtype=float))

    def evaluate(self, r) -> np.ndarray:
        """Evaluate the harmonic expansion at arbitrary geodesic radii."""
        _, norms, _ = self._basis()
        r = np.asarray(r, dtype=float)
        k = np.arange(self.model.resolution)
        raw = eval_gegenbauer(k, (self.model.n - 1) / 2.0, np.cos(r)[..., None])
        return (raw / norms) @ self.coefficients()


class TorusField(Field):
    """Function on the flat torus (R/2piZ)^n sampled on the uniform grid."""

    def __init__(self, model: ManifoldModel, values):
        if model.kind != TORUS:
            raise ValueError("TorusField needs a torus model")
        super().__init__(model, np.broadcast_to(np.asarray(values, dtype=float), (model.resolution,) * model.n))

    @classmethod
    def from_function(cls, model: ManifoldModel, func: Callable[..., np.ndarray]) -> "TorusField":
        axis = quadrature(model).nodes
        grids = np.meshgrid(*([axis] * model.n), indexing="ij", sparse=True)
        return cls(model, func(*grids))

    def eigenvalues(self) -> np.ndarray:
        return _torus_wavenumbers(self.model.n, self.model.resolution)

    def coefficients(self) -> np.ndarray:
        return np.fft.fftn(self.values)

    def from_coefficients(self, coeffs) -> "TorusField":
        return TorusField(self.model, np.real(np.fft.ifftn(coeffs)))

    def gradient(self) -> list[np.ndarray]:
        """Spectral partial derivatives along each axis."""
        n, N = self.model.n, self.model.resolution
        k = np.fft.fftfreq(N, 1.0 / N)
        if N % 2 == 0:
            k[N // 2] = 0.0  # drop the unpaired Nyquist mode for odd derivatives
        uh = self.coefficients()
        out = []
        for axis in range(n):
            shape = [1] * n
            shape[axis] = N
            out.append(np.real(np.fft.ifftn(1j * k.reshape(shape) * uh)))
        return out

    @classmethod
    def divergence(cls, model: ManifoldModel, components: list[np.ndarray]) -> "TorusField":
        n, N = model.n, model.resolution
        k = np.fft.fftfreq(N, 1.0 / N)
        if N % 2 == 0:
            k[N // 2] = 0.0
        total = np.zeros((N,) * n, dtype=complex)
        for axis, comp in enumerate(components):
            shape = [1] * n
            shape[axis] = N
            total += 1j * k.reshape(shape) * np.fft.fftn(comp)
        return cls(model, np.real(np.fft.ifftn(total)))


def field_type(model: ManifoldModel) -> type[Field]:
    return ZonalField if model.kind == SPHERE else TorusField


def field_from_function(model: ManifoldModel, func) -> Field:
    return field_type(model).from_function(model, func)


def constant_field(model: ManifoldModel, value: float) -> Field:
    if model.kind == SPHERE:
        return ZonalField(model, np.full(model.resolution, float(value)))
    return TorusField(model, np.full((model.resolution,) * model.n, float(value)))


__all__ = [
    "Field",
    "ZonalField",
    "TorusField",
    "field_type",
    "field_from_function",
    "constant_field",
    "TORUS",
]
