# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Patch boundaries and their evolution under dz/dt = u(z).

A `PatchCurve` holds N nodes z(xi_i) at xi_i = 2 pi i / N, counterclockwise. The
`SimulationState` bundles the curves with the kernel table (and optionally the Osgood
profile) they move under, plus passive tracers advected with the same RK4 stages.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Any, Optional, Tuple, Union

import numpy as np

from .biot_savart import velocity_nodes, velocity_points
from .spectral import cumulative_integral, parameter_grid, spectral_derivative, trig_interpolate
from .utils import ConfigError, ContactError, DegenerateCurveError, SelfIntersectionError, SolverHalt

logger = logging.getLogger(__name__)

__all__ = (
    "PatchCurve",
    "SimulationState",
    "StepConfig",
    "Trajectory",
    "area",
    "centroid",
    "cfl_dt",
    "check_state",
    "circle",
    "curvature",
    "ellipse",
    "fourier_patch",
    "min_distance",
    "node_spacing",
    "perimeter",
    "polygon_patch",
    "principal_axis_angle",
    "reparameterize",
    "run",
    "second_moments",
    "step",
)

SPACING_RATIO = 0.1
CONTACT_FACTOR = 5.0


################################################################################
# Types
################################################################################


def _signed_area(nodes):
    dz = spectral_derivative(nodes)
    return 0.5 * float(np.mean(nodes[:, 0] * dz[:, 1] - nodes[:, 1] * dz[:, 0])) * 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class PatchCurve:
    """Closed boundary of one patch; clockwise input is reversed to counterclockwise"""

    nodes: np.ndarray
    strength: float = 1.0
    id: Union[int, str] = 0

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 8:
            raise DegenerateCurveError("a curve needs at least 8 nodes of shape (N, 2)")
        if not np.all(np.isfinite(nodes)):
            raise DegenerateCurveError("curve nodes must be finite")
        a = _signed_area(nodes)
        if a == 0 or not math.isfinite(a):
            raise DegenerateCurveError("curve encloses no area")
        if a < 0:
            nodes = np.roll(nodes[::-1], 1, axis=0)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "strength", float(self.strength))

    def __len__(self):
        return self.nodes.shape[0]

    def with_nodes(self, nodes):
        return PatchCurve(nodes, self.strength, self.id)


@dataclass(frozen=True, eq=False)
class SimulationState:
    curves: Tuple[PatchCurve, ...]
    t: float
    table: Any
    profile: Any = None
    tracers: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    quad_window: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))
        tracers = np.array(self.tracers, dtype=float).reshape(-1, 2)
        tracers.setflags(write=False)
        object.__setattr__(self, "tracers", tracers)
        if not self.curves:
            raise ConfigError("a state needs at least one curve")
        for i in range(len(self.curves)):
            for j in range(i + 1, len(self.curves)):
                if min_distance(self.curves[i], self.curves[j]) <= 0:
                    raise ContactError(f"patches {i} and {j} touch")

    @property
    def sym(self):
        return self.table.sym

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class StepConfig:
    """dt: fixed step; target_nodes: int or one int per curve; cadences in steps (0 disables);
    curvature_weight > 0 switches reparameterization to curvature-weighted spacing"""

    dt: float
    t_end: float
    reparam_every: int = 20
    target_nodes: Union[int, Tuple[int, ...]] = 256
    quad_window: Optional[float] = None
    snapshot_every: int = 0
    diagnostics_every: int = 1
    cfl: float = 0.5
    curvature_weight: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if not self.t_end >= 0:
            raise ConfigError("t_end must be >= 0")
        nodes = self.target_nodes if isinstance(self.target_nodes, (tuple, list)) else (self.target_nodes,)
        if any(int(n) < 64 for n in nodes):
            raise ConfigError("target_nodes must be >= 64")
        if isinstance(self.target_nodes, list):
            object.__setattr__(self, "target_nodes", tuple(self.target_nodes))
        if self.quad_window is not None and not 0 < self.quad_window <= math.pi / 4:
            raise ConfigError("quad_window must be in (0, pi/4]")
        if min(self.reparam_every, self.snapshot_every, self.diagnostics_every) < 0:
            raise ConfigError("cadences must be >= 0")
        if not self.cfl > 0:
            raise ConfigError("cfl must be > 0")
        if not 0 <= self.curvature_weight < math.inf:
            raise ConfigError("curvature_weight must be >= 0")

    def nodes_for(self, i):
        return int(self.target_nodes[i] if isinstance(self.target_nodes, tuple) else self.target_nodes)


################################################################################
# Geometry
################################################################################


def _xy(curve):
    nodes = curve.nodes if isinstance(curve, PatchCurve) else np.asarray(curve, dtype=float)
    return nodes, spectral_derivative(nodes)


def area(curve):
    """signed area, spectrally accurate: 1/2 oint (x y' - y x')"""
    return _signed_area(_xy(curve)[0])


def perimeter(curve):
    nodes, dz = _xy(curve)
    return float(np.mean(np.linalg.norm(dz, axis=1))) * 2.0 * math.pi


def _boundary_mean(values):
    return float(np.mean(values)) * 2.0 * math.pi


def centroid(curve):
    nodes, dz = _xy(curve)
    x, y = nodes[:, 0], nodes[:, 1]
    a = area(curve)
    return np.array([_boundary_mean(0.5 * x * x * dz[:, 1]) / a, -_boundary_mean(0.5 * y * y * dz[:, 0]) / a])


def second_moments(curve):
    """(I_xx, I_xy, I_yy) of the patch about its centroid"""
    nodes, dz = _xy(curve)
    c = centroid(curve)
    x, y = nodes[:, 0] - c[0], nodes[:, 1] - c[1]
    ixx = _boundary_mean(x**3 * dz[:, 1]) / 3.0
    iyy = -_boundary_mean(y**3 * dz[:, 0]) / 3.0
    ixy = _boundary_mean(0.5 * x * x * y * dz[:, 1])
    return ixx, ixy, iyy


def principal_axis_angle(curve):
    """angle of the major axis in (-pi/2, pi/2]"""
    ixx, ixy, iyy = second_moments(curve)
    return 0.5 * math.atan2(2.0 * ixy, ixx - iyy)


def curvature(curve):
    nodes, dz = _xy(curve)
    d2z = spectral_derivative(nodes, 2)
    speed = np.linalg.norm(dz, axis=1)
    return (dz[:, 0] * d2z[:, 1] - dz[:, 1] * d2z[:, 0]) / speed**3


def node_spacing(curve):
    nodes = _xy(curve)[0]
    return np.linalg.norm(np.roll(nodes, -1, axis=0) - nodes, axis=1)


def min_distance(a, b):
    """minimum node-to-node distance between two curves"""
    na = a.nodes if isinstance(a, PatchCurve) else np.asarray(a, dtype=float)
    nb = b.nodes if isinstance(b, PatchCurve) else np.asarray(b, dtype=float)
    best = math.inf
    for start in range(0, na.shape[0], 512):
        d = np.linalg.norm(na[start : start + 512, None, :] - nb[None, :, :], axis=-1)
        best = min(best, float(d.min()))
    return best


def _self_intersects(nodes):
    p, q = nodes, np.roll(nodes, -1, axis=0)
    n = nodes.shape[0]
    i, j = np.triu_indices(n, 2)
    keep = (j - i) % n != n - 1
    i, j = i[keep], j[keep]

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    d1, d2 = orient(p[i], q[i], p[j]), orient(p[i], q[i], q[j])
    d3, d4 = orient(p[j], q[j], p[i]), orient(p[j], q[j], q[i])
    return bool(np.any((d1 * d2 < 0) & (d3 * d4 < 0)))


def check_state(state, contact_factor=CONTACT_FACTOR):
    """Raise SelfIntersectionError / ContactError when the state is no longer resolvable"""
    spacing = max(float(node_spacing(c).max()) for c in state.curves)
    for curve in state.curves:
        if _self_intersects(curve.nodes):
            raise SelfIntersectionError(f"curve {curve.id} self-intersects at t={state.t:g}")
    for i in range(len(state.curves)):
        for j in range(i + 1, len(state.curves)):
            d = min_distance(state.curves[i], state.curves[j])
            if d < contact_factor * spacing:
                raise ContactError(f"patches {state.curves[i].id} and {state.curves[j].id} are {d:.3g} apart (< {contact_factor:g} x spacing {spacing:.3g}) at t={state.t:g}")


def cfl_dt(state, velocities=None, c=0.5):
    """c * min node spacing / max node speed"""
    velocities = velocities if velocities is not None else velocity_nodes(state)
    speed = max(float(np.max(np.linalg.norm(u, axis=1))) for u in velocities)
    spacing = min(float(node_spacing(curve).min()) for curve in state.curves)
    return math.inf if speed == 0 else c * spacing / speed


################################################################################
# Shapes
################################################################################


def circle(radius=1.0, center=(0.0, 0.0), n=256, strength=1.0, id=0):
    xi = parameter_grid(n)
    nodes = np.column_stack((center[0] + radius * np.cos(xi), center[1] + radius * np.sin(xi)))
    return PatchCurve(nodes, strength, id)


def ellipse(a=2.0, b=1.0, center=(0.0, 0.0), angle=0.0, n=256, strength=1.0, id=0):
    if not (a > 0 and b > 0):
        raise ConfigError("ellipse semi-axes must be > 0")
    xi = parameter_grid(n)
    x, y = a * np.cos(xi), b * np.sin(xi)
    ca, sa = math.cos(angle), math.sin(angle)
    nodes = np.column_stack((center[0] + ca * x - sa * y, center[1] + sa * x + ca * y))
    return PatchCurve(nodes, strength, id)


def fourier_patch(radius=1.0, modes=(), center=(0.0, 0.0), n=256, strength=1.0, id=0):
    """r(xi) = radius (1 + sum_k A_k cos(k xi + phase_k)) for modes [(k, A_k, phase_k), ...]"""
    xi = parameter_grid(n)
    r = np.ones(n)
    for mode in modes:
        k, amp = int(mode[0]), float(mode[1])
        phase = float(mode[2]) if len(mode) > 2 else 0.0
        r += amp * np.cos(k * xi + phase)
    if np.any(r <= 0):
        raise ConfigError("fourier patch radius must stay positive")
    r *= radius
    return PatchCurve(np.column_stack((center[0] + r * np.cos(xi), center[1] + r * np.sin(xi))), strength, id)


def polygon_patch(vertices, n=256, strength=1.0, id=0):
    """n nodes equally spaced in arc length along the polygon through `vertices`"""
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[0] < 3:
        raise ConfigError("a polygon needs at least 3 vertices")
    closed = np.vstack((v, v[:1]))
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    if np.any(seg == 0):
        raise DegenerateCurveError("polygon has repeated vertices")
    s = np.concatenate(([0.0], np.cumsum(seg)))
    targets = np.arange(n) * s[-1] / n
    nodes = np.column_stack((np.interp(targets, s, closed[:, 0]), np.interp(targets, s, closed[:, 1])))
    return PatchCurve(nodes, strength, id)


################################################################################
# Redistribution
################################################################################


def reparameterize(curve, target_nodes, curvature_weight=0.0):
    """Resample to target_nodes points uniform in arc length, with the signed area kept.

    With a positive `curvature_weight` w the nodes are uniform in the weighted length
    ds sqrt(1 + (w L kappa / 2 pi)^2) instead, which packs them where the boundary bends
    and leaves circles unchanged. The length map is integrated spectrally and inverted by
    Newton iteration on the trigonometric interpolant. Node 0 stays fixed: the area is
    restored by a normal displacement weighted by 1 - cos(xi), which vanishes there.
    """
    if curvature_weight < 0:
        raise ConfigError("curvature_weight must be >= 0")
    nodes = curve.nodes
    n = nodes.shape[0]
    dz = spectral_derivative(nodes)
    speed = np.linalg.norm(dz, axis=1)
    if np.any(speed <= 0):
        raise DegenerateCurveError(f"curve {curve.id} has a stationary point")
    density = speed
    if curvature_weight > 0:
        scale = curvature_weight * float(np.mean(speed))
        density = speed * np.sqrt(1.0 + (scale * curvature(curve)) ** 2)
    arc, length = cumulative_integral(density)
    mean = length / (2.0 * math.pi)
    xi = parameter_grid(n)
    periodic = arc - mean * xi
    targets = np.arange(target_nodes) * length / target_nodes
    eta = np.interp(targets, np.append(arc, length), np.append(xi, 2.0 * math.pi))
    for _ in range(6):
        s = mean * eta + trig_interpolate(periodic, eta)
        eta = eta - (s - targets) / trig_interpolate(density, eta)
    if not np.all(np.isfinite(eta)):
        raise DegenerateCurveError(f"arc length inversion failed on curve {curve.id}")
    resampled = trig_interpolate(nodes, eta)
    before = area(curve)
    drift = abs(_signed_area(resampled) - before) / abs(before)
    bump = 1.0 - np.cos(parameter_grid(target_nodes))
    for _ in range(3):
        dr = spectral_derivative(resampled)
        ds = np.linalg.norm(dr, axis=1)
        delta = (before - _signed_area(resampled)) / (2.0 * math.pi * float(np.mean(bump * ds)))
        resampled = resampled + (delta * bump / ds)[:, None] * np.column_stack((dr[:, 1], -dr[:, 0]))
    logger.debug("reparameterized curve %s: %d -> %d nodes, area drift %.3g", curve.id, n, target_nodes, drift)
    return curve.with_nodes(resampled)



################################################################################
# Stepping
################################################################################


def _rhs(state, curves_nodes, tracers):
    stage = SimpleNamespace(
        curves=[SimpleNamespace(nodes=z, strength=c.strength) for z, c in zip(curves_nodes, state.curves)],
        table=state.table,
        quad_window=state.quad_window,
    )
    return velocity_nodes(stage), velocity_points(stage, tracers)


def _advance(state, dt):
    """RK4 step; returns the new state and the first-stage node velocities"""
    if not dt > 0:
        raise ConfigError("dt must be > 0")
    z0 = [c.nodes for c in state.curves]
    p0 = state.tracers
    try:
        k1, q1 = _rhs(state, z0, p0)
        k2, q2 = _rhs(state, [z + 0.5 * dt * k for z, k in zip(z0, k1)], p0 + 0.5 * dt * q1)
        k3, q3 = _rhs(state, [z + 0.5 * dt * k for z, k in zip(z0, k2)], p0 + 0.5 * dt * q2)
        k4, q4 = _rhs(state, [z + dt * k for z, k in zip(z0, k3)], p0 + dt * q3)
        new_nodes = [z + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d) for z, a, b, c, d in zip(z0, k1, k2, k3, k4)]
        new_tracers = p0 + dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        curves = []
        for curve, nodes in zip(state.curves, new_nodes):
            if _signed_area(nodes) <= 0:
                raise SelfIntersectionError(f"curve {curve.id} flipped orientation at t={state.t + dt:g}")
            curves.append(curve.with_nodes(nodes))
        new_state = state.replace(curves=tuple(curves), t=state.t + dt, tracers=new_tracers)
        check_state(new_state)
    except (ContactError, SelfIntersectionError, DegenerateCurveError) as e:
        raise SolverHalt(f"solver halted at t={state.t:g}: {e}", state=state, cause=e) from e
    return new_state, k1


def step(state, dt):
    """Advance nodes and tracers together by one classical RK4 step.

    Raises SolverHalt, carrying the last valid state, when the new curves self-intersect,
    flip orientation or come into contact.
    """
    return _advance(state, dt)[0]



@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)
    halted: Optional[SolverHalt] = None

    @property
    def final(self):
        return self.snapshots[-1][1] if self.snapshots else None


def _needs_reparam(curve):
    spacing = node_spacing(curve)
    return float(spacing.min()) < SPACING_RATIO * float(spacing.max())


def run(state, config, gammas=(0.5,), max_k=1, tracer_pairs=(), on_snapshot=None, on_record=None):
    """Step `state` to config.t_end.

    Snapshots (index, state) are emitted at step 0, every `snapshot_every` steps and at the
    end; diagnostic records every `diagnostics_every` steps and at the end. A SolverHalt is
    recorded on the trajectory after the halting state's snapshot and record are emitted.
    """
    from .diagnostics import diagnostic_rows

    if not isinstance(config, StepConfig):
        raise ConfigError("run needs a StepConfig")
    if config.quad_window is not None:
        state = state.replace(quad_window=config.quad_window)
    trajectory = Trajectory()
    n_steps = max(0, math.ceil(config.t_end / config.dt - 1e-9))
    snap_index = 0

    def emit_snapshot(s):
        nonlocal snap_index
        trajectory.snapshots.append((snap_index, s))
        if on_snapshot is not None:
            on_snapshot(snap_index, s)
        snap_index += 1

    def emit_record(s):
        record = diagnostic_rows(s, gammas=gammas, max_k=max_k, tracer_pairs=tracer_pairs)
        trajectory.records.append(record)
        if on_record is not None:
            on_record(record)

    emit_snapshot(state)
    if config.diagnostics_every:
        emit_record(state)
    warned = False
    last_snap = last_rec = 0
    for k in range(1, n_steps + 1):
        dt = min(config.dt, config.t_end - (k - 1) * config.dt)
        try:
            new_state, velocities = _advance(state, dt)
        except SolverHalt as e:
            logger.error("%s", e)
            trajectory.halted = e
            if last_snap != k - 1:
                emit_snapshot(e.state)
            if config.diagnostics_every and last_rec != k - 1:
                emit_record(e.state)
            return trajectory
        if not warned:
            limit = cfl_dt(state, velocities, c=config.cfl)
            if dt > limit:
                logger.warning("dt=%g exceeds the CFL estimate %g at t=%g", dt, limit, state.t)
                warned = True
        state = new_state.replace(t=k * config.dt if k < n_steps else config.t_end)
        if config.reparam_every and (k % config.reparam_every == 0 or any(_needs_reparam(c) for c in state.curves)):
            state = state.replace(curves=tuple(reparameterize(c, config.nodes_for(i), config.curvature_weight) for i, c in enumerate(state.curves)))
        if config.snapshot_every and k % config.snapshot_every == 0 or k == n_steps:
            emit_snapshot(state)
            last_snap = k
        if config.diagnostics_every and (k % config.diagnostics_every == 0 or k == n_steps):
            emit_record(state)
            last_rec = k
        logger.debug("step %d/%d t=%g", k, n_steps, state.t)
    logger.info("run finished at t=%g after %d steps", state.t, n_steps)
    return trajectory
