"""Second-order jets and their arithmetic.

A :class:`Jet2` packs the value, gradient and Hessian of a scalar
function at a point.  All propagation rules are exact (no numerical
differencing), and every rule assembles the Hessian from entrywise
symmetric operations, so ``hessian[i, j] == hessian[j, i]`` holds
bit-for-bit.

Arrays may carry a leading batch axis: ``value (B,)``,
``gradient (B, m)``, ``hessian (B, m, m)`` evaluate a whole point set in
one pass.  Scalar jets use shapes ``()``, ``(m,)``, ``(m, m)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...j->...ij", a, b)


def _sym_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # a_i b_j + b_i a_j: entry (i, j) and (j, i) add the same two products,
    # so the result is exactly symmetric in floating point.
    return _outer(a, b) + _outer(b, a)


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and symmetric Hessian of a scalar at a point."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray

    @staticmethod
    def constant(c, m: int, batch: tuple[int, ...] = ()) -> "Jet2":
        value = np.full(batch, float(c))
        return Jet2(value, np.zeros(batch + (m,)), np.zeros(batch + (m, m)))

    @staticmethod
    def coordinate(values: np.ndarray, index: int, m: int) -> "Jet2":
        values = np.asarray(values, dtype=float)
        grad = np.zeros(values.shape + (m,))
        grad[..., index] = 1.0
        return Jet2(values, grad, np.zeros(values.shape + (m, m)))

    # -- ring operations ---------------------------------------------------

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.gradient, -self.hessian)

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value,
                    self.gradient + other.gradient,
                    self.hessian + other.hessian)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value,
                    self.gradient - other.gradient,
                    self.hessian - other.hessian)

    def __mul__(self, other: "Jet2") -> "Jet2":
        u, v = self.value[..., None], other.value[..., None]
        value = self.value * other.value
        grad = u * other.gradient + v * self.gradient
        hess = (self.value[..., None, None] * other.hessian
                + other.value[..., None, None] * self.hessian
                + _sym_outer(self.gradient, other.gradient))
        return Jet2(value, grad, hess)

    def __truediv__(self, other: "Jet2") -> "Jet2":
        if np.any(other.value == 0.0):
            raise DomainError("division by zero")
        q = self.value / other.value
        grad = (self.gradient - q[..., None] * other.gradient) / other.value[..., None]
        hess = (self.hessian
                - q[..., None, None] * other.hessian
                - _sym_outer(grad, other.gradient)) / other.value[..., None, None]
        return Jet2(q, grad, hess)

    def powi(self, n: int) -> "Jet2":
        """Integer power; valid for any base sign."""
        if n == 0:
            return Jet2(np.ones_like(self.value),
                        np.zeros_like(self.gradient),
                        np.zeros_like(self.hessian))
        if n == 1:
            return self
        if n < 0 and np.any(self.value == 0.0):
            raise DomainError("zero raised to a negative power")
        with np.errstate(divide="ignore", invalid="ignore"):
            v1 = self.value ** (n - 1)
            v2 = self.value ** (n - 2)
        g0 = self.value ** n
        g1 = n * v1
        g2 = n * (n - 1) * v2
        return self._chain(g0, g1, g2)

    def powf(self, r: float) -> "Jet2":
        """Real power; requires a strictly positive base."""
        if np.any(self.value <= 0.0):
            raise DomainError("non-integer power of a non-positive base")
        g0 = self.value ** r
        g1 = r * self.value ** (r - 1.0)
        g2 = r * (r - 1.0) * self.value ** (r - 2.0)
        return self._chain(g0, g1, g2)

    # -- chain rule --------------------------------------------------------

    def _chain(self, g0: np.ndarray, g1: np.ndarray, g2: np.ndarray) -> "Jet2":
        grad = g1[..., None] * self.gradient
        hess = (g1[..., None, None] * self.hessian
                + g2[..., None, None] * _outer(self.gradient, self.gradient))
        return Jet2(g0, grad, hess)


def jsin(j: Jet2) -> Jet2:
    s, c = np.sin(j.value), np.cos(j.value)
    return j._chain(s, c, -s)


def jcos(j: Jet2) -> Jet2:
    s, c = np.sin(j.value), np.cos(j.value)
    return j._chain(c, -s, -c)


def jexp(j: Jet2) -> Jet2:
    e = np.exp(j.value)
    return j._chain(e, e, e)


def jlog(j: Jet2) -> Jet2:
    if np.any(j.value <= 0.0):
        raise DomainError("log of a non-positive argument")
    v = j.value
    return j._chain(np.log(v), 1.0 / v, -1.0 / (v * v))


def jsqrt(j: Jet2) -> Jet2:
    if np.any(j.value < 0.0):
        raise DomainError("sqrt of a negative argument")
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(j.value)
        g1 = 0.5 / s
        g2 = -0.25 / (s * j.value)
    return j._chain(s, g1, g2)


def jtanh(j: Jet2) -> Jet2:
    t = np.tanh(j.value)
    sech2 = 1.0 - t * t
    return j._chain(t, sech2, -2.0 * t * sech2)


def jpow(base: Jet2, exponent: Jet2) -> Jet2:
    """General power a^b computed as exp(b * log(a))."""
    return jexp(exponent * jlog(base))
