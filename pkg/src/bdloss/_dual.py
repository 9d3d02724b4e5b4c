"""Minimal forward-mode dual numbers.

A :class:`Dual` carries a value and a tangent vector. numpy ufuncs such as
``np.cos`` fall back to the same-named method on Python objects, so closed
form expressions written with ``np.*`` work unchanged on floats, arrays
and duals.
"""
import math

import numpy as np


class Dual:
    __slots__ = ("val", "der")

    def __init__(self, val, der):
        self.val = float(val)
        self.der = np.asarray(der, dtype=float)

    @classmethod
    def variables(cls, values):
        """Seed one dual per value with unit tangents."""
        eye = np.eye(len(values))
        return [cls(v, eye[i]) for i, v in enumerate(values)]

    def __repr__(self):
        return f"Dual({self.val!r}, {self.der!r})"

    @staticmethod
    def _lift(other):
        if isinstance(other, Dual):
            return other
        return Dual(other, 0.0)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        return Dual(self.val + other, self.der)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        return Dual(self.val - other, self.der)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.der)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.der * other.val + other.der * self.val)
        return Dual(self.val * other, self.der * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            v = self.val / other.val
            return Dual(v, (self.der - v * other.der) / other.val)
        return Dual(self.val / other, self.der / other)

    def __rtruediv__(self, other):
        v = other / self.val
        return Dual(v, -v * self.der / self.val)

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("dual exponents are not supported")
        if p == 2:
            return self * self
        return Dual(self.val ** p, p * self.val ** (p - 1) * self.der)

    # comparisons look at the value only
    def __lt__(self, other):
        return self.val < self._lift(other).val

    def __le__(self, other):
        return self.val <= self._lift(other).val

    def __gt__(self, other):
        return self.val > self._lift(other).val

    def __ge__(self, other):
        return self.val >= self._lift(other).val

    def __float__(self):
        return self.val

    def cos(self):
        return Dual(math.cos(self.val), -math.sin(self.val) * self.der)

    def sin(self):
        return Dual(math.sin(self.val), math.cos(self.val) * self.der)

    def exp(self):
        e = math.exp(self.val)
        return Dual(e, e * self.der)

    def log(self):
        return Dual(math.log(self.val), self.der / self.val)

    def sqrt(self):
        r = math.sqrt(self.val)
        if r == 0.0:
            # sqrt has no derivative at 0; the zero subgradient is used
            return Dual(0.0, np.zeros_like(self.der))
        return Dual(r, self.der / (2.0 * r))


def value(x):
    return x.val if isinstance(x, Dual) else x


def tangent(x, n):
    return x.der if isinstance(x, Dual) else np.zeros(n)
