# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Osgood profiles of a multiplier symbol and the envelope bounds built on them.

    H(r)  = int_2^r dq / (q log q m(q))                 (r >= 2; log-linear below)
    H~(r) = int_{1/r}^1 drho / (rho (m(1/rho) + 1))
    M(r)  = r (m~(r) + 1)  for r >= r0, r (m~(r0) + 1) below
    HH(r) = int_{r0}^r dq / M(q)                         (log-linear below r0)

Each integral is tabulated in a variable that keeps the double-exponential inverses
representable (log log r for H, log r for the others); tables grow on demand.
"""

import logging
import math
import threading
from collections import namedtuple

import numpy as np
from scipy import integrate, optimize

from .multiplier import classify
from .utils import OsgoodRangeError, PatchFlowError, gauss_legendre

logger = logging.getLogger(__name__)

__all__ = (
    "Envelope",
    "OsgoodProfile",
    "blow_up_horizon",
    "envelope_flow_bound",
    "envelope_separation",
    "h_eval",
    "h_inv",
    "h_inv_log",
    "h_tilde_eval",
    "h_tilde_inv",
    "h_tilde_inv_log",
    "nu_eval",
    "nu_tilde_eval",
    "script_h",
    "script_h_inv",
    "script_m",
)

Envelope = namedtuple("Envelope", ["lower", "upper", "horizon"])

LOG_CAP = 690.0
EXP_LIMIT = 709.0


def _m_of_log(sym, u):
    """m(e^u), through the r form for moderate u and the stable m~ form beyond"""
    u = np.asarray(u, dtype=float)
    with np.errstate(all="ignore"):
        small = sym(np.exp(np.minimum(u, 30.0)))
        large = sym.m_tilde(np.maximum(u, 30.0))[0]
    return np.where(u < 30.0, small, large)


def _safe_exp(x):
    return math.inf if x > EXP_LIMIT else math.exp(x)


class _CumulativeMap:
    """F(v) = int_{v0}^v f, tabulated on [v0, v_end] and extended by doubling up to cap.

    The table is published as one (nodes, values, cap) tuple; readers take it once per
    call and only the extending thread, under the lock, replaces it.
    """

    def __init__(self, integrand, v0, cap, step=0.25):
        self.f = integrand
        self.v0 = float(v0)
        self.step = step
        self._table = (np.array([self.v0]), np.array([0.0]), float(cap))
        self._lock = threading.Lock()
        self._extend(self.v0 + 1.0)

    @property
    def cap(self):
        return self._table[2]

    def _scalar(self, v):
        value = float(np.nan_to_num(self.f(np.array([v]))[0], nan=0.0, posinf=np.inf))
        return value

    def _extend(self, target):
        if self._table[0][-1] >= min(target, self._table[2]):
            return self._table
        with self._lock:
            nodes, values, cap = self._table
            target = min(target, cap)
            while nodes[-1] < target:
                end = nodes[-1]
                new_end = min(cap, end + max(1.0, end - self.v0))
                edges = np.linspace(end, new_end, max(2, math.ceil((new_end - end) / self.step)) + 1)
                x, w = gauss_legendre(16)
                mid, half = 0.5 * (edges[:-1] + edges[1:]), 0.5 * np.diff(edges)
                pts = mid[:, None] + half[:, None] * x[None, :]
                with np.errstate(all="ignore"):
                    vals = np.nan_to_num(self.f(pts.ravel()).reshape(pts.shape), nan=0.0, posinf=np.inf)
                pieces = (vals * w[None, :]).sum(axis=1) * half
                values = np.concatenate((values, values[-1] + np.cumsum(pieces)))
                nodes = np.concatenate((nodes, edges[1:]))
                logger.debug("extended cumulative table to v=%g (F=%g)", new_end, values[-1])
                if not np.isfinite(values[-1]):
                    cap = float(nodes[-1])
                    break
            self._table = (nodes, values, cap)
            return self._table

    @property
    def end_value(self):
        return float(self._extend(self.cap)[1][-1])

    def forward(self, v):
        v = float(v)
        cap = self.cap
        if v > cap:
            _, values, cap = self._extend(cap)
            return float(values[-1]) + self._scalar(cap) * (v - cap)
        nodes, values, _ = self._extend(v)
        k = max(int(np.searchsorted(nodes, v, side="right")) - 1, 0)
        base = float(values[k])
        if v == nodes[k]:
            return base
        extra, _ = integrate.quad(lambda q: self._scalar(q), float(nodes[k]), v, epsabs=1e-15, epsrel=1e-13, limit=100)
        return base + extra

    def inverse(self, y, bounded, limit_name):
        """v with F(v) = y, y >= 0"""
        y = float(y)
        nodes, values, cap = self._table
        while values[-1] < y and nodes[-1] < cap:
            nodes, values, cap = self._extend(nodes[-1] + max(1.0, nodes[-1] - self.v0))
        if values[-1] < y:
            if bounded:
                raise OsgoodRangeError(f"{limit_name}^-1 is only defined up to {values[-1]:.6g}", limit=float(values[-1]))
            slope = self._scalar(cap)
            logger.warning("%s^-1(%g) beyond the tabulated range, extrapolating linearly", limit_name, y)
            return cap + (y - float(values[-1])) / slope
        k = int(np.searchsorted(values, y, side="left"))
        if k == 0:
            return self.v0
        lo, hi = float(nodes[k - 1]), float(nodes[k])
        return optimize.brentq(lambda v: self.forward(v) - y, lo, hi, xtol=1e-15, rtol=1e-14, maxiter=200)


def _default_r0(sym):
    for k in range(61):
        r0 = 2.0 * 1.25**k
        r = np.linspace(r0, 10.0 * r0, 65)
        with np.errstate(all="ignore"):
            g = r * sym.m_tilde(r)[0]
        if not np.all(np.isfinite(g)):
            continue
        d1, d2 = np.diff(g), np.diff(g, 2)
        if np.all(d1 > 0) and np.all(d2 >= -1e-12 * np.max(np.abs(g))):
            return r0
    logger.warning("no convexity threshold found for %s, using r0 = 2", sym)
    return 2.0


class OsgoodProfile:
    """Tabulated H, H~, M and HH for one symbol, with inverses.

    `osgood` is the verdict of `classify` unless given; a failed Osgood condition makes
    the inverse maps bounded and their range errors carry the finite limit.
    """

    def __init__(self, sym, r0=None, osgood=None):
        self.sym = sym
        self.r0 = float(_default_r0(sym) if r0 is None else r0)
        if self.r0 < 2:
            raise PatchFlowError("r0 must be >= 2")
        self.osgood = osgood or classify(sym).osgood
        self.bounded = self.osgood == "Fails"
        self.m2 = float(sym(2.0))
        self.m_r0 = float(_m_of_log(sym, self.r0))
        # H in s = log log r, from r = 2
        self._h = _CumulativeMap(lambda s: 1.0 / _m_of_log(sym, np.exp(s)), math.log(math.log(2.0)), LOG_CAP)
        # H~ in u = log r, both sides of r = 1
        self._ht_up = _CumulativeMap(lambda u: 1.0 / (_m_of_log(sym, u) + 1.0), 0.0, 700.0)
        self._ht_down = _CumulativeMap(lambda w: 1.0 / (_m_of_log(sym, -w) + 1.0), 0.0, 700.0)
        # HH in v = log r, from r0
        self._hh = _CumulativeMap(lambda v: 1.0 / (_m_of_log(sym, np.exp(v)) + 1.0), math.log(self.r0), LOG_CAP)

    def __repr__(self):
        return f"OsgoodProfile({self.sym}, r0={self.r0:g}, osgood={self.osgood})"

    @property
    def h_limit(self):
        return self._h.end_value if self.bounded else math.inf


def nu_eval(sym, rho):
    """nu(rho) = rho log(1/rho) m(1/rho) for rho <= 1/2, rho log 2 m(2) beyond"""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise PatchFlowError("rho must be > 0")
    inner = np.minimum(rho, 0.5)
    out = np.where(rho <= 0.5, inner * np.log(1.0 / inner) * sym(1.0 / inner), rho * math.log(2.0) * sym(2.0))
    return out if out.ndim else float(out)


def nu_tilde_eval(sym, rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise PatchFlowError("rho must be > 0")
    out = rho * (sym(1.0 / rho) + 1.0)
    return out if out.ndim else float(out)


def h_eval(profile, r):
    r = float(r)
    if r <= 0:
        raise PatchFlowError("r must be > 0")
    if r < 2:
        return math.log(r / 2.0) / (math.log(2.0) * profile.m2)
    return profile._h.forward(math.log(math.log(r)))


def h_inv_log(profile, y):
    """log H^-1(y), finite where H^-1 overflows and +inf once log H^-1 does too"""
    y = float(y)
    if y < 0:
        return math.log(2.0) + y * math.log(2.0) * profile.m2
    return _safe_exp(profile._h.inverse(y, profile.bounded, "H"))


def h_inv(profile, y):
    return _safe_exp(h_inv_log(profile, y))


def h_tilde_eval(profile, r):
    r = float(r)
    if r <= 0:
        raise PatchFlowError("r must be > 0")
    u = math.log(r)
    return profile._ht_up.forward(u) if u >= 0 else -profile._ht_down.forward(-u)


def h_tilde_inv_log(profile, y):
    y = float(y)
    if y >= 0:
        return profile._ht_up.inverse(y, profile.bounded, "H~")
    return -profile._ht_down.inverse(-y, False, "H~")


def h_tilde_inv(profile, y):
    return _safe_exp(h_tilde_inv_log(profile, y))


def script_m(profile, r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise PatchFlowError("r must be > 0")
    out = np.where(r >= profile.r0, r * (_m_of_log(profile.sym, np.maximum(r, profile.r0)) + 1.0), r * (profile.m_r0 + 1.0))
    return out if out.ndim else float(out)


def script_h(profile, r):
    r = float(r)
    if r <= 0:
        raise PatchFlowError("r must be > 0")
    if r < profile.r0:
        return math.log(r / profile.r0) / (profile.m_r0 + 1.0)
    return profile._hh.forward(math.log(r))


def script_h_inv(profile, y):
    y = float(y)
    if y < 0:
        return profile.r0 * math.exp(y * (profile.m_r0 + 1.0))
    return _safe_exp(profile._hh.inverse(y, profile.bounded, "HH"))


def blow_up_horizon(profile, y0, C):
    """Time after which H(.) + C t leaves the range of H^-1 (inf when Osgood holds)"""
    if not profile.bounded or C <= 0:
        return math.inf
    return max(0.0, (profile.h_limit - y0) / C)


def _check(length, t, C):
    if not length > 0:
        raise PatchFlowError("separation must be > 0")
    if t < 0 or C < 0:
        raise PatchFlowError("t and C must be >= 0")


def envelope_flow_bound(profile, sep0, t, C):
    """Two-sided bound on the separation of a particle pair started sep0 apart.

    lower = 1 / H^-1(H(1/sep0) + C t), upper = 1 / H^-1(H(1/sep0) - C t); past the
    blow-up horizon of a failed-Osgood profile the lower bound is 0.
    """
    _check(sep0, t, C)
    y0 = h_eval(profile, 1.0 / sep0)
    horizon = blow_up_horizon(profile, y0, C)
    if t == 0:
        return Envelope(float(sep0), float(sep0), horizon)
    try:
        lower = math.exp(-h_inv_log(profile, y0 + C * t))
    except OsgoodRangeError:
        lower = 0.0
    upper = math.exp(-h_inv_log(profile, y0 - C * t))
    return Envelope(lower, upper, horizon)


def envelope_separation(profile, d0, t, C):
    """Lower bound 1 / H^-1(H(2/d0) + C t) on the distance between patches started d0 apart"""
    _check(d0, t, C)
    y0 = h_eval(profile, 2.0 / d0)
    if t == 0:
        return 0.5 * float(d0)
    try:
        return math.exp(-h_inv_log(profile, y0 + C * t))
    except OsgoodRangeError:
        return 0.0
