# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Periodic data on the uniform grid xi_i = 2 pi i / N: derivatives, interpolation, arc length."""

import math

import numpy as np

__all__ = ("cumulative_integral", "parameter_grid", "spectral_derivative", "trig_interpolate", "wrap")


def parameter_grid(n):
    return 2.0 * math.pi * np.arange(n) / n


def wrap(s):
    """angle difference folded into [-pi, pi)"""
    return (np.asarray(s, dtype=float) + math.pi) % (2.0 * math.pi) - math.pi


def _wavenumbers(n):
    return np.fft.fftfreq(n, 1.0 / n)


def spectral_derivative(values, order=1, dealias=False):
    """d^order/dxi^order of periodic samples along axis 0.

    With `dealias`, modes above N/3 are dropped before differentiating.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    k = _wavenumbers(n)
    factor = (1j * k) ** order
    if n % 2 == 0 and order % 2:
        factor[n // 2] = 0.0
    if dealias:
        factor[np.abs(k) > n / 3.0] = 0.0
    shape = (n,) + (1,) * (values.ndim - 1)
    return np.real(np.fft.ifft(np.fft.fft(values, axis=0) * factor.reshape(shape), axis=0))


def trig_interpolate(values, eta):
    """Trigonometric interpolant of periodic samples evaluated at parameters eta.

    The Nyquist mode of even N is split evenly between +N/2 and -N/2, which keeps the
    interpolant real.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    eta = np.asarray(eta, dtype=float)
    coeffs = np.fft.fft(values, axis=0) / n
    k = _wavenumbers(n)
    phase = np.exp(1j * np.multiply.outer(eta.ravel(), k))
    if n % 2 == 0:
        phase[:, n // 2] = np.cos(0.5 * n * eta.ravel())
    out = np.real(phase @ coeffs.reshape(n, -1))
    return out.reshape(eta.shape + values.shape[1:])


def cumulative_integral(values):
    """int_0^xi f at the grid nodes, for periodic f; returns (cumulative, total over a period)"""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    coeffs = np.fft.fft(values) / n
    k = _wavenumbers(n)
    xi = parameter_grid(n)
    mean = float(np.real(coeffs[0]))
    inv = np.zeros(n, dtype=complex)
    nz = k != 0
    if n % 2 == 0:
        nz[n // 2] = False
    inv[nz] = coeffs[nz] / (1j * k[nz])
    periodic = np.real(np.fft.ifft(inv * n))
    return mean * xi + periodic - periodic[0], 2.0 * math.pi * mean
