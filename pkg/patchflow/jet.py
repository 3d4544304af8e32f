# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Truncated Taylor series ("jets") over numpy arrays.

A jet of order K holds the normalized coefficients c[k] = f^(k)(x0)/k! of a function at
every point of an array x0. Arithmetic and the elementary functions below propagate the
coefficients with the usual recurrences, which yields exact derivatives (up to rounding)
of any composition without finite differences.
"""

import math

import numpy as np

__all__ = ("Jet", "variable", "constant", "exp", "log", "log1p", "power", "sqrt", "sin", "cos", "derivatives")


class Jet:
    __slots__ = ("c",)

    def __init__(self, coefficients):
        self.c = coefficients

    @property
    def order(self):
        return self.c.shape[0] - 1

    @property
    def value(self):
        return self.c[0]

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return constant(other, self)

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.c + other.c)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return Jet(self.c - other.c)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return Jet(-self.c)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self.c, other.c
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(out.shape[0]):
            out[k] = sum(a[i] * b[k - i] for i in range(k + 1))
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        a, b = self.c, other.c
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(out.shape[0]):
            acc = a[k] - sum(b[i] * out[k - i] for i in range(1, k + 1))
            out[k] = acc / b[0]
        return Jet(out)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, other):
        if isinstance(other, Jet):
            return exp(other * log(self))
        return power(self, float(other))

    def __rpow__(self, other):
        return exp(self * math.log(other))


def variable(x, order):
    x = np.asarray(x, dtype=float)
    c = np.zeros((order + 1,) + x.shape)
    c[0] = x
    if order >= 1:
        c[1] = 1.0
    return Jet(c)


def constant(value, like):
    value = np.asarray(value, dtype=float)
    c = np.zeros((like.c.shape[0],) + np.broadcast_shapes(value.shape, like.c.shape[1:]))
    c[0] = value
    return Jet(c)


def exp(a):
    a = a.c
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for k in range(1, a.shape[0]):
        out[k] = sum(i * a[i] * out[k - i] for i in range(1, k + 1)) / k
    return Jet(out)


def _log_tail(a, out, denominator):
    for k in range(1, a.shape[0]):
        acc = a[k] - sum(i * out[i] * a[k - i] for i in range(1, k)) / k
        out[k] = acc / denominator
    return Jet(out)


def log(a):
    a = a.c
    out = np.zeros_like(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[0] = np.log(a[0])
    return _log_tail(a, out, a[0])


def log1p(a):
    """log(1 + a) with full precision in the value for small a"""
    a = a.c
    out = np.zeros_like(a)
    out[0] = np.log1p(a[0])
    shifted = a.copy()
    shifted[0] = 1.0 + a[0]
    return _log_tail(shifted, out, shifted[0])


def power(a, p):
    """a**p for a constant exponent, requires a > 0 where derivatives are taken"""
    a = a.c
    out = np.zeros_like(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[0] = np.power(a[0], p)
        for k in range(1, a.shape[0]):
            acc = sum(((p + 1.0) * i - k) * a[i] * out[k - i] for i in range(1, k + 1))
            out[k] = acc / (k * a[0])
    return Jet(out)


def sqrt(a):
    return power(a, 0.5)


def _sincos(a):
    a = a.c
    s = np.zeros_like(a)
    c = np.zeros_like(a)
    s[0] = np.sin(a[0])
    c[0] = np.cos(a[0])
    for k in range(1, a.shape[0]):
        s[k] = sum(i * a[i] * c[k - i] for i in range(1, k + 1)) / k
        c[k] = -sum(i * a[i] * s[k - i] for i in range(1, k + 1)) / k
    return s, c


def sin(a):
    return Jet(_sincos(a)[0])


def cos(a):
    return Jet(_sincos(a)[1])


def derivatives(jet):
    """stack of f, f', ..., f^(K)"""
    factorials = np.array([math.factorial(k) for k in range(jet.c.shape[0])], dtype=float)
    return jet.c * factorials.reshape((-1,) + (1,) * (jet.c.ndim - 1))
