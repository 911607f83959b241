"""Truncated Taylor series ("jets") for exact radial derivatives.

A jet stores the normalized Taylor coefficients ``c[k] = f^{(k)}(r)/k!`` of a
function at every point of an array of radii.  Arithmetic follows the usual
Cauchy-product recurrences, so derivatives of composite profiles such as
``chi(r) * delta**(-m) * U(r/delta)`` come out exact to roundoff without any
symbolic algebra.
"""

from __future__ import annotations

from math import factorial

import numpy as np


class Jet:
    __slots__ = ("c",)

    def __init__(self, coeffs: np.ndarray):
        self.c = np.asarray(coeffs, dtype=float)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @classmethod
    def variable(cls, x, order: int = 4) -> "Jet":
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, like: "Jet") -> "Jet":
        c = np.zeros_like(like.c)
        c[0] = value
        return cls(c)

    def derivative(self, k: int) -> np.ndarray:
        """k-th derivative at the expansion points."""
        return factorial(k) * self.c[k]

    def derivatives(self) -> list[np.ndarray]:
        return [self.derivative(k) for k in range(self.order + 1)]

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self)

    def __add__(self, other):
        return Jet(self.c + self._coerce(other).c)

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.c - self._coerce(other).c)

    def __rsub__(self, other):
        return Jet(self._coerce(other).c - self.c)

    def __neg__(self):
        return Jet(-self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self.c, other.c
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(out.shape[0]):
            for j in range(k + 1):
                out[k] += a[j] * b[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        a = self.c
        out = np.zeros_like(a)
        out[0] = 1.0 / a[0]
        for k in range(1, a.shape[0]):
            acc = np.zeros_like(a[0])
            for j in range(1, k + 1):
                acc += a[j] * out[k - j]
            out[k] = -acc / a[0]
        return Jet(out)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def exp(self) -> "Jet":
        a = self.c
        out = np.zeros_like(a)
        out[0] = np.exp(a[0])
        for k in range(1, a.shape[0]):
            acc = np.zeros_like(a[0])
            for j in range(1, k + 1):
                acc += j * a[j] * out[k - j]
            out[k] = acc / k
        return Jet(out)

    def __pow__(self, alpha: float) -> "Jet":
        """Real power of a jet with positive constant term."""
        a = self.c
        out = np.zeros_like(a)
        out[0] = a[0] ** alpha
        for k in range(1, a.shape[0]):
            acc = np.zeros_like(a[0])
            for j in range(1, k + 1):
                acc += ((alpha + 1.0) * j - k) * a[j] * out[k - j]
            out[k] = acc / (k * a[0])
        return Jet(out)

    def where(self, mask: np.ndarray, other: "Jet") -> "Jet":
        """Pointwise select: self where mask, other elsewhere."""
        return Jet(np.where(mask, self.c, other.c))
