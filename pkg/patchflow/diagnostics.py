# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Regularity functionals of discrete patch boundaries and envelope checks.

All functions here are pure functions of a snapshot: recomputing them on the same state
gives bit-identical results.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from matplotlib.path import Path

from .biot_savart import grad_u_sym_points
from .contour import PatchCurve, area, curvature, min_distance, node_spacing, perimeter
from .osgood import envelope_flow_bound, envelope_separation, h_eval
from .spectral import spectral_derivative
from .utils import ConfigError, DegenerateCurveError, PatchFlowError, finite_or_tag

logger = logging.getLogger(__name__)

__all__ = (
    "DiagnosticRecord",
    "EnvelopeCheck",
    "delta_gamma",
    "diagnostic_rows",
    "envelope_check",
    "fit_dominating_constant",
    "flow_divergence",
    "geometric_defect",
    "grad_u_tangential_max",
    "holder_seminorm",
    "w_inf",
)

DEFECT_ANGLES = 10_000
C_MAX = 1e6


def _nodes(curve):
    return curve.nodes if isinstance(curve, PatchCurve) else np.asarray(curve, dtype=float)


def _check_gamma(gamma):
    if not 0 < gamma < 1:
        raise ConfigError("gamma must be in (0, 1)")


def holder_seminorm(curve, k, gamma):
    """max_{i != j} |d^k z(xi_i) - d^k z(xi_j)| / |z_i - z_j|^gamma, spectral d^k, ambient chords"""
    if k < 1:
        raise ConfigError("k must be >= 1")
    _check_gamma(gamma)
    nodes = _nodes(curve)
    n = nodes.shape[0]
    if n < 4 * k + 4:
        raise ConfigError(f"holder_seminorm(k={k}) needs at least {4 * k + 4} nodes")
    deriv = spectral_derivative(nodes, k, dealias=k >= 2)
    best = 0.0
    for start in range(0, n, 256):
        stop = min(start + 256, n)
        chord = np.linalg.norm(nodes[start:stop, None, :] - nodes[None, :, :], axis=-1)
        jump = np.linalg.norm(deriv[start:stop, None, :] - deriv[None, :, :], axis=-1)
        rows = np.arange(start, stop)[:, None]
        upper = np.arange(n)[None, :] > rows
        if np.any(upper & (chord == 0.0)):
            raise DegenerateCurveError("duplicate nodes give a zero chord")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(upper, jump / chord**gamma, 0.0)
        best = max(best, float(ratio.max()))
    return best


def w_inf(curve):
    """min |dz/dxi|, the discrete |W|_inf"""
    return float(np.min(np.linalg.norm(spectral_derivative(_nodes(curve)), axis=1)))


def delta_gamma(curve, gamma):
    """holder(1, gamma) / w_inf + 1"""
    w = w_inf(curve)
    if w <= 0:
        raise DegenerateCurveError("w_inf vanishes")
    return holder_seminorm(curve, 1, gamma) / w + 1.0


################################################################################
# Geometric defect
################################################################################


def _nearest_boundary_point(nodes, x):
    p, q = nodes, np.roll(nodes, -1, axis=0)
    seg = q - p
    t = np.clip(np.sum((x - p) * seg, axis=1) / np.sum(seg * seg, axis=1), 0.0, 1.0)
    foot = p + t[:, None] * seg
    dist = np.linalg.norm(foot - x, axis=1)
    d = float(dist.min())
    candidates = np.nonzero(dist <= d + 1e-12 * (1.0 + d))[0]
    k = int(candidates[0])
    # adjacent segments sharing a vertex are the same point
    distinct = {tuple(np.round(foot[c], 12)) for c in candidates}
    ambiguous = len(distinct) > 1
    tangent = seg[k] / np.linalg.norm(seg[k])
    if t[k] in (0.0, 1.0):
        other = k - 1 if t[k] == 0.0 else (k + 1) % nodes.shape[0]
        tangent = tangent + seg[other] / np.linalg.norm(seg[other])
        tangent /= np.linalg.norm(tangent)
    inward = np.array([-tangent[1], tangent[0]])
    return d, foot[k], inward, ambiguous


def geometric_defect(curve, x, rho, angles=DEFECT_ANGLES):
    """Angular measure of S_rho(x) symmetric-difference Sigma(x).

    S_rho(x) = directions z with x + rho z inside the patch, Sigma(x) = the half circle
    z . n >= 0 for the inward normal n at the boundary point nearest x. Membership is
    sampled on `angles` directions and every switch is located by bisection.
    """
    if not rho > 0:
        raise ConfigError("rho must be > 0")
    nodes = _nodes(curve)
    x = np.asarray(x, dtype=float).reshape(2)
    d, _, inward, ambiguous = _nearest_boundary_point(nodes, x)
    if ambiguous:
        logger.info("nearest boundary point of %s is not unique, using the lowest parameter", x.tolist())
    path = Path(nodes)

    def member(theta):
        z = np.column_stack((np.cos(theta), np.sin(theta)))
        inside = path.contains_points(x + rho * z)
        return inside ^ (z @ inward >= 0.0)

    theta = 2.0 * math.pi * np.arange(angles + 1) / angles
    flags = member(theta)
    cell = theta[1] - theta[0]
    measure = cell * float(np.sum(flags[:-1] & flags[1:]))
    for k in np.nonzero(flags[:-1] != flags[1:])[0]:
        lo, hi = float(theta[k]), float(theta[k + 1])
        start = bool(flags[k])
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            if bool(member(np.array([mid]))[0]) == start:
                lo = mid
            else:
                hi = mid
        switch = 0.5 * (lo + hi)
        measure += (switch - theta[k]) if start else (theta[k + 1] - switch)
    return measure


################################################################################
# Envelopes
################################################################################


@dataclass
class EnvelopeCheck:
    kind: str
    series: List[Tuple[float, float]]
    envelope: List[Tuple[float, float, float]]
    fitted_C: float
    passed: bool
    refinement_ratio: float = math.nan

    def to_dict(self):
        return {
            "kind": self.kind,
            "fitted_C": finite_or_tag(self.fitted_C),
            "pass": self.passed,
            "refinement_ratio": finite_or_tag(self.refinement_ratio),
            "series": [[t, v] for t, v in self.series],
            "envelope": [[t, finite_or_tag(lo), finite_or_tag(hi)] for t, lo, hi in self.envelope],
        }


def _required_gaps(series, profile, kind):
    """(t, g) with the envelope holding at t iff C t >= g"""
    t0, v0 = series[0]
    if kind == "flow_pair":
        y0 = h_eval(profile, 1.0 / v0)
        out = []
        for t, v in series[1:]:
            y = profile.h_limit if v <= 0 else h_eval(profile, 1.0 / v)
            out.append((t - t0, abs(y - y0)))
        return out
    if kind == "separation":
        y0 = h_eval(profile, 2.0 / v0)
        out = []
        for t, v in series[1:]:
            y = profile.h_limit if v <= 0 else h_eval(profile, 1.0 / v)
            out.append((t - t0, max(y - y0, 0.0)))
        return out
    raise ConfigError("kind must be 'flow_pair' or 'separation'")


def _fit(series, profile, kind, c_max):
    gaps = _required_gaps(series, profile, kind)
    if any(t <= 0 and g > 0 for t, g in gaps):
        return math.inf

    def dominated(C):
        return all(C * t >= g for t, g in gaps if t > 0)

    if dominated(0.0):
        return 0.0
    if not dominated(c_max):
        return math.inf
    lo, hi = 0.0, c_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if dominated(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def envelope_check(series, profile, kind, refined=None, c_max=C_MAX):
    """Fit the single constant C making the envelope dominate `series` [(t, value), ...].

    flow_pair: 1/H^-1(H(1/v0) + C t) <= v(t) <= 1/H^-1(H(1/v0) - C t) for a tracer pair
    started v0 apart. separation: v(t) >= 1/H^-1(H(2/v0) + C t) for the distance between
    patches. `refined` is the same series at twice the resolution; refinement_ratio is
    its fitted C over this one's.
    """
    series = [(float(t), float(v)) for t, v in series]
    if not series:
        raise ConfigError("series must not be empty")
    if series[0][1] <= 0:
        raise ConfigError("initial value must be > 0")
    C = _fit(series, profile, kind, c_max)
    passed = math.isfinite(C)
    ratio = math.nan
    if refined is not None and passed:
        C2 = _fit([(float(t), float(v)) for t, v in refined], profile, kind, c_max)
        ratio = 1.0 if C2 == C == 0.0 else (C2 / C if C > 0 else math.inf)
    envelope = []
    if passed:
        t0, v0 = series[0]
        for t, _ in series:
            if kind == "flow_pair":
                e = envelope_flow_bound(profile, v0, t - t0, C)
                envelope.append((t, e.lower, e.upper))
            else:
                envelope.append((t, envelope_separation(profile, v0, t - t0, C), math.inf))
    logger.info("envelope check %s: C=%g pass=%s", kind, C, passed)
    return EnvelopeCheck(kind, series, envelope, C, passed, ratio)


def fit_dominating_constant(values, bounds):
    """smallest C with values <= C * bounds pointwise"""
    values, bounds = np.asarray(values, dtype=float), np.asarray(bounds, dtype=float)
    if values.shape != bounds.shape or values.size == 0:
        raise ConfigError("values and bounds must be nonempty and of equal shape")
    if np.any(bounds <= 0):
        raise ConfigError("bounds must be > 0")
    return float(np.max(values / bounds))


################################################################################
# Flow maps
################################################################################


def _states(run):
    snapshots = getattr(run, "snapshots", run)
    return [s[1] if isinstance(s, tuple) else s for s in snapshots]


def _vorticity_at(state, points):
    omega = np.zeros(points.shape[0])
    for curve in state.curves:
        omega += curve.strength * Path(curve.nodes).contains_points(points)
    return omega


def flow_divergence(run_a, run_b, time_tol=1e-9):
    """delta(t) = sum_i w_i |Phi^A_t(x_i) - Phi^B_t(x_i)| / sum_i w_i, w_i = |omega_0(x_i)|, at shared times"""
    a, b = _states(run_a), _states(run_b)
    if not a or not b:
        raise PatchFlowError("runs must hold snapshots")
    seeds_a, seeds_b = a[0].tracers, b[0].tracers
    if seeds_a.shape != seeds_b.shape or not np.array_equal(seeds_a, seeds_b) or seeds_a.shape[0] == 0:
        raise PatchFlowError("runs must share a nonempty tracer set")
    weights = np.abs(_vorticity_at(a[0], seeds_a))
    if weights.sum() == 0:
        weights = np.ones(seeds_a.shape[0])
    b_times = np.array([s.t for s in b])
    out = []
    for sa in a:
        k = int(np.argmin(np.abs(b_times - sa.t)))
        if abs(b_times[k] - sa.t) > time_tol * max(1.0, abs(sa.t)):
            continue
        gap = np.linalg.norm(sa.tracers - b[k].tracers, axis=1)
        out.append((sa.t, float(np.sum(weights * gap) / np.sum(weights))))
    return out


################################################################################
# Velocity gradient along the boundary
################################################################################


def grad_u_tangential_max(state, offset=1e-6):
    """max over nodes of |S(grad u) w . w|, w the unit tangent, sampled offset*spacing inside"""
    points, tangents = [], []
    for curve in state.curves:
        dz = spectral_derivative(curve.nodes)
        w = dz / np.linalg.norm(dz, axis=1)[:, None]
        inward = np.column_stack((-w[:, 1], w[:, 0]))
        spacing = node_spacing(curve)
        points.append(curve.nodes + offset * spacing[:, None] * inward)
        tangents.append(w)
    points, tangents = np.concatenate(points), np.concatenate(tangents)
    S = grad_u_sym_points(state, points)
    strain = np.einsum("ni,nij,nj->n", tangents, S, tangents)
    return float(np.max(np.abs(strain)))


################################################################################
# Records
################################################################################


@dataclass
class DiagnosticRecord:
    """One diagnostic time: per-patch rows plus global entries.

    min_dist is inf for a single patch.
    """

    t: float
    patches: List[Dict] = field(default_factory=list)
    min_dist: float = math.inf
    tracer_pairs: List[float] = field(default_factory=list)
    gammas: Tuple[float, ...] = (0.5,)
    max_k: int = 1

    def columns(self):
        cols = ["t", "patch_id", "area", "perimeter", "w_inf"]
        cols += [f"holder_k{k}_g{g:g}" for k in range(1, self.max_k + 1) for g in self.gammas]
        cols += [f"delta_g{g:g}" for g in self.gammas]
        cols += ["max_curvature", "min_dist"]
        cols += [f"pair{i}" for i in range(len(self.tracer_pairs))]
        return cols

    def rows(self):
        out = []
        for patch in self.patches:
            row = {"t": self.t, "patch_id": patch["patch_id"], "area": patch["area"], "perimeter": patch["perimeter"], "w_inf": patch["w_inf"]}
            for k in range(1, self.max_k + 1):
                for g in self.gammas:
                    row[f"holder_k{k}_g{g:g}"] = patch["holder"][(k, g)]
            for g in self.gammas:
                row[f"delta_g{g:g}"] = patch["delta_gamma"][g]
            row["max_curvature"] = patch["max_curvature"]
            row["min_dist"] = self.min_dist
            for i, sep in enumerate(self.tracer_pairs):
                row[f"pair{i}"] = sep
            out.append(row)
        return out


def diagnostic_rows(state, gammas=(0.5,), max_k=1, tracer_pairs=()):
    """DiagnosticRecord of one state; tracer_pairs are (i, j) indices into state.tracers"""
    gammas = tuple(float(g) for g in gammas)
    for g in gammas:
        _check_gamma(g)
    patches = []
    for curve in state.curves:
        w = w_inf(curve)
        holder = {(k, g): holder_seminorm(curve, k, g) for k in range(1, max_k + 1) for g in gammas}
        patches.append(
            {
                "patch_id": curve.id,
                "area": area(curve),
                "perimeter": perimeter(curve),
                "w_inf": w,
                "holder": holder,
                "delta_gamma": {g: holder[(1, g)] / w + 1.0 for g in gammas},
                "max_curvature": float(np.max(np.abs(curvature(curve)))),
            }
        )
    dmin = math.inf
    for i in range(len(state.curves)):
        for j in range(i + 1, len(state.curves)):
            dmin = min(dmin, min_distance(state.curves[i], state.curves[j]))
    seps = [float(np.linalg.norm(state.tracers[i] - state.tracers[j])) for i, j in tracer_pairs]
    return DiagnosticRecord(float(state.t), patches, dmin, seps, gammas, max_k)
