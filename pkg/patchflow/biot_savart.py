# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Velocity and symmetric velocity gradient of a multi-patch state by boundary integrals.

    u(x)      = sum_j a_j  oint R~(|x - z_j|) z_j' deta
    S(grad u) = sym( -sum_j a_j oint K(x - z_j) (x) (z_j2', -z_j1') deta )

Each curve integral is split with the partition of unity chi(s) = exp(-36 (s/w)^8)
around the parameter nearest the target: the periodic trapezoid rule takes (1 - chi) f
on the nodes, and chi f on the window |s| < w is integrated by nested tanh-sinh levels
on a 9-point Lagrange interpolant of the curve, split at s = 0.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from matplotlib.path import Path
from scipy import special

from .kernel import k_eval
from .spectral import spectral_derivative, wrap
from .utils import ConfigError, ContactError, DegenerateCurveError, PatchFlowError, map_chunks

logger = logging.getLogger(__name__)

__all__ = (
    "VelocityQuery",
    "default_window",
    "far_field_bound",
    "grad_u_sym",
    "grad_u_sym_points",
    "velocity",
    "velocity_modulus",
    "velocity_nodes",
    "velocity_oracle",
    "velocity_points",
)

WINDOW_SPACINGS = 8
WINDOW_TOL = 1e-10
TANH_SINH_T = 3.2
MAX_LEVEL = 6
CONTACT_TOL = 1e-12
GRAD_CONTACT_TOL = 1e-10
BLOCK = 32

_OFFSETS = np.arange(-4, 5)


def default_window(n_nodes):
    return min(WINDOW_SPACINGS * 2.0 * math.pi / n_nodes, math.pi / 4.0)


@dataclass(frozen=True)
class VelocityQuery:
    """A velocity target; `on_boundary` = (patch index, node index) when it is a curve node"""

    target: Tuple[float, float]
    on_boundary: Optional[Tuple[int, int]] = None
    quad_window: Optional[float] = None

    def __post_init__(self):
        target = tuple(float(v) for v in np.asarray(self.target, dtype=float).ravel())
        if len(target) != 2 or not all(map(math.isfinite, target)):
            raise ConfigError("target must be a finite 2-vector")
        object.__setattr__(self, "target", target)
        if self.quad_window is not None and not 0 < self.quad_window <= math.pi / 4:
            raise ConfigError("quad_window must be in (0, pi/4]")


@dataclass(frozen=True, eq=False)
class _CurveData:
    index: int
    nodes: np.ndarray
    dz: np.ndarray
    d2z: np.ndarray
    strength: float
    window: float
    reach: float

    @property
    def size(self):
        return self.nodes.shape[0]

    @property
    def h(self):
        return 2.0 * math.pi / self.size


def _prepare(state, quad_window=None):
    quad_window = quad_window or getattr(state, "quad_window", None)
    out = []
    for j, curve in enumerate(state.curves):
        nodes = np.asarray(curve.nodes, dtype=float)
        spacing = np.linalg.norm(np.roll(nodes, -1, axis=0) - nodes, axis=1)
        if spacing.min() <= 0:
            raise DegenerateCurveError(f"curve {j} has coincident nodes")
        dz = spectral_derivative(nodes)
        w = quad_window or default_window(nodes.shape[0])
        reach = 2.0 * w * float(np.max(np.linalg.norm(dz, axis=1)))
        out.append(_CurveData(j, nodes, dz, spectral_derivative(nodes, 2), float(curve.strength), w, reach))
    return out


################################################################################
# Local quadrature
################################################################################


def _chi(s, w):
    return np.exp(-36.0 * (np.asarray(s) / w) ** 8)


@lru_cache(16)
def _tanh_sinh_level(level):
    """(sigma, jacobian, step) of the points added at `level`; s = w sigma, ds = w jacobian dt"""
    step = 2.0 ** -(3 + level)
    k = np.arange(-int(TANH_SINH_T / step), int(TANH_SINH_T / step) + 1)
    if level:
        k = k[k % 2 == 1]
    t = k * step
    a = math.pi * np.sinh(t)
    sigma, rest = special.expit(a), special.expit(-a)
    return sigma, sigma * rest * math.pi * np.cosh(t), step


def _lagrange_weights(tau):
    out = np.ones(tau.shape + (_OFFSETS.size,))
    for a, oa in enumerate(_OFFSETS):
        for ob in _OFFSETS:
            if ob != oa:
                out[..., a] *= (tau - ob) / (oa - ob)
    return out


def _interpolate(data, base, s, origin, second=False):
    """(z(eta) - origin, z'(eta)[, z''(eta)]) at eta = h base + s, from the 9-point stencil
    around the nearest node.

    base (node units) has shape (T,), s (1, M), origin (T, 2). The offset is kept apart from
    the base parameter and differences are interpolated, so points close to the origin
    keep their relative precision.
    """
    b = np.asarray(base, dtype=float)[:, None]
    t = np.asarray(s, dtype=float) / data.h
    c = np.rint(b + t)
    lag = _lagrange_weights((b - c) + t)
    idx = (c.astype(int)[..., None] + _OFFSETS) % data.size
    rel = np.einsum("tmk,tmkd->tmd", lag, data.nodes[idx] - origin[:, None, None, :])
    dz = np.einsum("tmk,tmkd->tmd", lag, data.dz[idx])
    if not second:
        return rel, dz
    return rel, dz, np.einsum("tmk,tmkd->tmd", lag, data.d2z[idx])


def _window_integral(data, origin, center, integrand):
    """int_{-w}^{w} chi(s) f(h center + s) ds per target, refined until each target settles"""
    total = prev = None
    done = np.zeros(origin.shape[0], dtype=bool)
    for level in range(MAX_LEVEL + 1):
        sigma, jac, step = _tanh_sinh_level(level)
        s = data.window * sigma
        weights = data.window * jac * _chi(s, data.window)
        plus = integrand(*_interpolate(data, center, s[None, :], origin))
        minus = integrand(*_interpolate(data, center, -s[None, :], origin))
        part = np.einsum("tm...,m->t...", plus + minus, weights)
        current = step * part if level == 0 else 0.5 * prev + step * part
        if level == 0:
            total = current
        else:
            change = np.abs(current - prev).reshape(origin.shape[0], -1).max(axis=1)
            total = np.where(done.reshape((-1,) + (1,) * (current.ndim - 1)), total, current)
            done |= change < WINDOW_TOL
            if done.all():
                break
        prev = current
    else:
        logger.debug("window quadrature on curve %d stopped at level %d with %d unsettled targets", data.index, MAX_LEVEL, int((~done).sum()))
    if not np.all(np.isfinite(total)):
        raise PatchFlowError(f"window quadrature on curve {data.index} produced non-finite values")
    return total


def _trapezoid(data, origin, center, integrand):
    rel = data.nodes[None, :, :] - origin[:, None, :]
    dz = np.broadcast_to(data.dz, rel.shape)
    with np.errstate(all="ignore"):
        values = integrand(rel, dz)
    if center is not None:
        weight = 1.0 - _chi(wrap(data.h * (np.arange(data.size)[None, :] - center[:, None])), data.window)
        weight = weight.reshape(weight.shape + (1,) * (values.ndim - 2))
        values = np.where(weight == 0.0, 0.0, values * weight)
    return data.h * values.sum(axis=1)


def _project(data, origin, start):
    """parameter (node units) of the curve point nearest each origin, by Newton from node `start`"""
    eta = np.asarray(start, dtype=float)
    for _ in range(8):
        rel, dz, d2z = _interpolate(data, eta, np.zeros((1, 1)), origin, second=True)
        rel, dz, d2z = rel[:, 0], dz[:, 0], d2z[:, 0]
        speed2 = np.sum(dz * dz, axis=1)
        curv = speed2 + np.sum(rel * d2z, axis=1)
        slope = np.where(curv > 0.1 * speed2, curv, speed2)
        eta = eta - np.clip(np.sum(rel * dz, axis=1) / slope / data.h, -1.0, 1.0)
    return eta


################################################################################
# Integrands
################################################################################


def _velocity_integrand(table, anchor=None):
    def f(rel, dz):
        rho = np.linalg.norm(rel, axis=-1)
        with np.errstate(divide="ignore"):
            weight = table.r_tilde(rho)
        tangent = dz if anchor is None else dz - anchor.reshape((-1,) + (1,) * (dz.ndim - 2) + (2,))
        return weight[..., None] * tangent

    return f


def _grad_integrand(table):
    def f(rel, dz):
        kernel = k_eval(table, -rel)
        normal = np.stack((dz[..., 1], -dz[..., 0]), axis=-1)
        return -kernel[..., :, None] * normal[..., None, :]

    return f


def _contribution(data, targets, table, kind, own=None, snap=False):
    """oint of one curve (without its strength) at targets (T, 2).

    own: node indices when the targets are nodes of this curve; with `snap`, a target on
    a node is treated as that node instead of raising ContactError.
    """
    targets = np.asarray(targets, dtype=float)
    shape = (targets.shape[0], 2) if kind == "velocity" else (targets.shape[0], 2, 2)
    out = np.zeros(shape)

    if own is not None:
        own = np.asarray(own)
        anchor = None
        if kind == "velocity" and table.near_exponent <= -1.0:
            anchor = data.dz[own]
        integrand = _velocity_integrand(table, anchor) if kind == "velocity" else _grad_integrand(table)
        origin = data.nodes[own]
        center = own.astype(float)
        out += _trapezoid(data, origin, center, integrand)
        out += _window_integral(data, origin, center, integrand)
        return out

    dist = np.linalg.norm(data.nodes[None, :, :] - targets[:, None, :], axis=-1)
    nearest = np.argmin(dist, axis=1)
    dmin = dist[np.arange(targets.shape[0]), nearest]
    tol = CONTACT_TOL if kind == "velocity" else GRAD_CONTACT_TOL
    touching = dmin <= tol
    if np.any(touching):
        if not snap:
            raise ContactError(f"target within {tol:g} of a node of patch {data.index}")
        out[touching] = _contribution(data, data.nodes[nearest[touching]], table, kind, own=nearest[touching])
    integrand = _velocity_integrand(table) if kind == "velocity" else _grad_integrand(table)
    far = ~touching & (dmin >= data.reach)
    near = ~touching & ~far
    if np.any(far):
        out[far] = _trapezoid(data, targets[far], None, integrand)
    if np.any(near):
        origin = targets[near]
        center = _project(data, origin, nearest[near])
        out[near] = _trapezoid(data, origin, center, integrand) + _window_integral(data, origin, center, integrand)
    return out


def _blocked(fn, n_targets):
    """fn(lo, hi) over fixed blocks of BLOCK targets, so the values never depend on the worker count"""
    n_blocks = -(-n_targets // BLOCK)

    def run(lo, hi):
        return np.concatenate([fn(b * BLOCK, min((b + 1) * BLOCK, n_targets)) for b in range(lo, hi)], axis=0)

    return map_chunks(run, n_blocks, min_chunk=2)


################################################################################
# Public operations
################################################################################


def velocity(state, query):
    """u at one target as a length-2 array.

    A target within CONTACT_TOL of a node raises ContactError unless `on_boundary` names
    that node; velocity_points is the form that snaps free points onto nodes.
    """
    if not isinstance(query, VelocityQuery):
        query = VelocityQuery(query)
    curves = _prepare(state, query.quad_window)
    x = np.array([query.target])
    total = np.zeros(2)
    for data in curves:
        own = None
        if query.on_boundary is not None and query.on_boundary[0] == data.index:
            own = [query.on_boundary[1] % data.size]
        part = _contribution(data, x, state.table, "velocity", own=own)
        total += data.strength * part[0]
    return total


def velocity_nodes(state, quad_window=None):
    """u at every node of every curve: the contour dynamics right-hand side, one (N_i, 2) array per curve"""
    curves = _prepare(state, quad_window)
    out = []
    for data_i in curves:

        def block(lo, hi, data_i=data_i):
            acc = np.zeros((hi - lo, 2))
            for data in curves:
                if data.index == data_i.index:
                    part = _contribution(data, data_i.nodes[lo:hi], state.table, "velocity", own=np.arange(lo, hi))
                else:
                    part = _contribution(data, data_i.nodes[lo:hi], state.table, "velocity")
                acc += data.strength * part
            return acc

        out.append(_blocked(block, data_i.size))
    return out


def velocity_points(state, points, quad_window=None):
    """u at free points (M, 2), e.g. passive tracers; a point on a node takes that node's velocity"""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if points.shape[0] == 0:
        return np.zeros((0, 2))
    curves = _prepare(state, quad_window)

    def block(lo, hi):
        acc = np.zeros((hi - lo, 2))
        for data in curves:
            acc += data.strength * _contribution(data, points[lo:hi], state.table, "velocity", snap=True)
        return acc

    return _blocked(block, points.shape[0])


def grad_u_sym_points(state, points, quad_window=None):
    curves = _prepare(state, quad_window)
    points = np.atleast_2d(np.asarray(points, dtype=float))

    def block(lo, hi):
        acc = np.zeros((hi - lo, 2, 2))
        for data in curves:
            acc += data.strength * _contribution(data, points[lo:hi], state.table, "grad")
        sym = 0.5 * (acc + np.swapaxes(acc, -1, -2))
        trace = 0.5 * (sym[:, 0, 0] + sym[:, 1, 1])
        sym[:, 0, 0] -= trace
        sym[:, 1, 1] -= trace
        return sym

    return _blocked(block, points.shape[0])


def grad_u_sym(state, x, quad_window=None):
    """Symmetric traceless part of grad u at x (2x2); x must stay 1e-10 away from every node"""
    return grad_u_sym_points(state, np.asarray(x, dtype=float).reshape(1, 2), quad_window)[0]


def velocity_oracle(state, x, resolution):
    """u(x) by midpoint quadrature of int_D K(x - y) dy on a square grid over the bounding box"""
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    x = np.asarray(x, dtype=float).reshape(2)
    allnodes = np.concatenate([np.asarray(c.nodes, dtype=float) for c in state.curves])
    lo, hi = allnodes.min(axis=0), allnodes.max(axis=0)
    cell = float(np.max(hi - lo)) * 1.02 / resolution
    lo = 0.5 * (lo + hi) - 0.5 * cell * resolution
    axis = (np.arange(resolution) + 0.5) * cell
    total = np.zeros(2)
    rows = max(1, 262144 // resolution)
    for curve in state.curves:
        path = Path(np.asarray(curve.nodes, dtype=float))
        acc = np.zeros(2)
        for start in range(0, resolution, rows):
            gy, gx = np.meshgrid(lo[1] + axis[start : start + rows], lo[0] + axis, indexing="ij")
            pts = np.column_stack((gx.ravel(), gy.ravel()))
            pts = pts[path.contains_points(pts)]
            rel = x - pts
            rel = rel[np.any(rel != 0.0, axis=1)]
            if rel.size:
                acc += k_eval(state.table, rel).sum(axis=0)
        total += float(curve.strength) * acc * cell * cell
    return total


def _shoelace(nodes):
    x, y = nodes[:, 0], nodes[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def far_field_bound(state, i):
    """Bound on |u| at patch i contributed by all other patches: sum_j |a_j| |D_j| max G(rho)/rho over their distance range"""
    nodes_i = np.asarray(state.curves[i].nodes, dtype=float)
    diam_i = float(np.max(np.ptp(nodes_i, axis=0))) * math.sqrt(2.0)
    bound = 0.0
    for j, curve in enumerate(state.curves):
        if j == i:
            continue
        nodes_j = np.asarray(curve.nodes, dtype=float)
        d = float(np.min(np.linalg.norm(nodes_i[:, None, :] - nodes_j[None, :, :], axis=-1)))
        if d <= 0:
            raise ContactError(f"patches {i} and {j} touch")
        diam_j = float(np.max(np.ptp(nodes_j, axis=0))) * math.sqrt(2.0)
        rho = np.geomspace(d, d + diam_i + diam_j, 64)
        bound += abs(float(curve.strength)) * abs(_shoelace(nodes_j)) * float(np.max(np.abs(state.table.g(rho)) / rho))
    return bound


def velocity_modulus(state, samples=32, velocities=None):
    """sup |u(x) - u(y)| / (|x - y| (m(1/|x - y|) + 1)) over pairs of sampled boundary nodes"""
    velocities = velocities if velocities is not None else velocity_nodes(state)
    xs, us = [], []
    for curve, u in zip(state.curves, velocities):
        nodes = np.asarray(curve.nodes, dtype=float)
        picks = np.linspace(0, nodes.shape[0], min(samples, nodes.shape[0]), endpoint=False).astype(int)
        xs.append(nodes[picks])
        us.append(np.asarray(u)[picks])
    xs, us = np.concatenate(xs), np.concatenate(us)
    iu = np.triu_indices(xs.shape[0], 1)
    dx = np.linalg.norm(xs[:, None, :] - xs[None, :, :], axis=-1)[iu]
    du = np.linalg.norm(us[:, None, :] - us[None, :, :], axis=-1)[iu]
    keep = dx > 0
    ratio = du[keep] / (dx[keep] * (state.table.sym(1.0 / dx[keep]) + 1.0))
    return float(ratio.max()) if ratio.size else 0.0
