# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Run configuration: a JSON document parsed into frozen dataclasses.

    {
      "multiplier": {"family": "euler"},
      "patches": [{"shape": "circle", "radius": 1.0, "center": [0, 0], "strength": 1.0}],
      "solver": {"dt": 0.001, "t_end": 1.0, "target_nodes": 256, "reparam_every": 20},
      "diagnostics": {"cadence": 10, "gamma_list": [0.5], "max_k": 1, "tracers": [[0.5, 0], [0.6, 0]], "tracer_pairs": [[0, 1]]},
      "kernel": {"rho_min": 1e-8, "rho_max": 1e3, "tol": 1e-6},
      "output": {"directory": "out", "formats": ["json", "svg"], "snapshot_every": 100}
    }
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from frozendict import frozendict

from .contour import SimulationState, StepConfig, circle, ellipse, fourier_patch, min_distance, node_spacing, polygon_patch
from .multiplier import MultiplierSymbol
from .utils import ConfigError, PatchFlowError

__all__ = ("DiagnosticsConfig", "KernelConfig", "OutputConfig", "PatchSpec", "RunConfig", "SolverConfig", "load_config")

SHAPES = ("circle", "ellipse", "fourier", "polygon")
FORMATS = ("json", "svg")
MARGIN_SPACINGS = 10.0


def _section(data, name, allowed):
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"'{name}' must be an object")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    return section


def _positive(name, value, integer=False):
    try:
        value = int(value) if integer else float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number") from None
    if not value > 0 or (not integer and not math.isfinite(value)):
        raise ConfigError(f"{name} must be > 0")
    return value


def _point(name, value):
    try:
        x, y = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a 2-vector") from None
    return (x, y)


@dataclass(frozen=True)
class PatchSpec:
    shape: str
    params: frozendict = field(default_factory=frozendict)
    center: Tuple[float, float] = (0.0, 0.0)
    strength: float = 1.0
    id: Optional[str] = None

    @classmethod
    def from_dict(cls, data, index=0):
        if not isinstance(data, dict) or "shape" not in data:
            raise ConfigError(f"patch {index} must be an object with a 'shape'")
        shape = data["shape"]
        if shape not in SHAPES:
            raise ConfigError(f"patch {index}: shape must be one of {SHAPES}")
        params = {k: v for k, v in data.items() if k not in ("shape", "center", "strength", "id")}
        allowed = {"circle": {"radius"}, "ellipse": {"a", "b", "angle"}, "fourier": {"radius", "modes"}, "polygon": {"vertices"}}[shape]
        if set(params) - allowed:
            raise ConfigError(f"patch {index}: unknown parameters {sorted(set(params) - allowed)} for {shape}")
        if shape == "polygon" and "vertices" not in params:
            raise ConfigError(f"patch {index}: polygon needs 'vertices'")
        frozen = {k: (tuple(tuple(float(x) for x in row) for row in v) if k in ("modes", "vertices") else float(v)) for k, v in params.items()}
        for k in ("radius", "a", "b"):
            if k in frozen:
                _positive(f"patch {index} {k}", frozen[k])
        return cls(shape, frozendict(frozen), _point(f"patch {index} center", data.get("center", (0.0, 0.0))), float(data.get("strength", 1.0)), data.get("id"))

    def build(self, n, index):
        label = self.id if self.id is not None else index
        p = self.params
        if self.shape == "circle":
            return circle(p.get("radius", 1.0), self.center, n, self.strength, label)
        if self.shape == "ellipse":
            return ellipse(p.get("a", 2.0), p.get("b", 1.0), self.center, p.get("angle", 0.0), n, self.strength, label)
        if self.shape == "fourier":
            return fourier_patch(p.get("radius", 1.0), p.get("modes", ()), self.center, n, self.strength, label)
        vertices = np.asarray(p["vertices"]) + np.asarray(self.center)
        return polygon_patch(vertices, n, self.strength, label)

    def as_dict(self):
        out = {"shape": self.shape, **{k: ([list(r) for r in v] if isinstance(v, tuple) else v) for k, v in self.params.items()}}
        out.update(center=list(self.center), strength=self.strength)
        if self.id is not None:
            out["id"] = self.id
        return out


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    target_nodes: int = 256
    reparam_every: int = 20
    quad_window: Optional[float] = None
    cfl: float = 0.5
    curvature_weight: float = 0.0

    @classmethod
    def from_dict(cls, data):
        s = _section(data, "solver", ("dt", "t_end", "target_nodes", "reparam_every", "quad_window", "cfl", "curvature_weight"))
        t_end = float(s.get("t_end", cls.t_end))
        if not t_end >= 0:
            raise ConfigError("solver.t_end must be >= 0")
        weight = s.get("curvature_weight", cls.curvature_weight)
        weight = 0.0 if weight == 0 else _positive("solver.curvature_weight", weight)
        return cls(
            _positive("solver.dt", s.get("dt", cls.dt)),
            t_end,
            _positive("solver.target_nodes", s.get("target_nodes", cls.target_nodes), integer=True),
            int(s.get("reparam_every", cls.reparam_every)),
            None if s.get("quad_window") is None else _positive("solver.quad_window", s["quad_window"]),
            _positive("solver.cfl", s.get("cfl", cls.cfl)),
            weight,
        )


@dataclass(frozen=True)
class DiagnosticsConfig:
    cadence: int = 1
    gamma_list: Tuple[float, ...] = (0.5,)
    max_k: int = 1
    tracers: Tuple[Tuple[float, float], ...] = ()
    tracer_pairs: Tuple[Tuple[int, int], ...] = ()

    @classmethod
    def from_dict(cls, data):
        s = _section(data, "diagnostics", ("cadence", "gamma_list", "max_k", "tracers", "tracer_pairs"))
        gammas = tuple(float(g) for g in s.get("gamma_list", cls.gamma_list))
        if not gammas or any(not 0 < g < 1 for g in gammas):
            raise ConfigError("diagnostics.gamma_list entries must be in (0, 1)")
        tracers = tuple(_point(f"tracer {i}", p) for i, p in enumerate(s.get("tracers", ())))
        pairs = tuple((int(a), int(b)) for a, b in s.get("tracer_pairs", ()))
        for a, b in pairs:
            if not (0 <= a < len(tracers) and 0 <= b < len(tracers)) or a == b:
                raise ConfigError(f"tracer pair ({a}, {b}) does not name two tracers")
        cadence = int(s.get("cadence", cls.cadence))
        if cadence < 0:
            raise ConfigError("diagnostics.cadence must be >= 0")
        return cls(cadence, gammas, _positive("diagnostics.max_k", s.get("max_k", cls.max_k), integer=True), tracers, pairs)


@dataclass(frozen=True)
class KernelConfig:
    rho_min: float = 1e-8
    rho_max: float = 1e3
    tol: float = 1e-6

    @classmethod
    def from_dict(cls, data):
        s = _section(data, "kernel", ("rho_min", "rho_max", "tol"))
        out = cls(_positive("kernel.rho_min", s.get("rho_min", cls.rho_min)), _positive("kernel.rho_max", s.get("rho_max", cls.rho_max)), _positive("kernel.tol", s.get("tol", cls.tol)))
        if out.rho_min >= out.rho_max:
            raise ConfigError("kernel.rho_min must be < kernel.rho_max")
        if out.tol > 1e-4:
            raise ConfigError("kernel.tol must be <= 1e-4")
        return out


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "patchflow-out"
    formats: Tuple[str, ...] = ("json",)
    snapshot_every: int = 0
    viewport: Optional[Tuple[float, float, float, float]] = None

    @classmethod
    def from_dict(cls, data):
        s = _section(data, "output", ("directory", "formats", "snapshot_every", "viewport"))
        formats = tuple(s.get("formats", cls.formats))
        if any(f not in FORMATS for f in formats):
            raise ConfigError(f"output.formats entries must be in {FORMATS}")
        viewport = s.get("viewport")
        if viewport is not None:
            viewport = tuple(float(v) for v in viewport)
            if len(viewport) != 4 or viewport[0] >= viewport[1] or viewport[2] >= viewport[3]:
                raise ConfigError("output.viewport must be [xmin, xmax, ymin, ymax]")
        every = int(s.get("snapshot_every", cls.snapshot_every))
        if every < 0:
            raise ConfigError("output.snapshot_every must be >= 0")
        return cls(str(s.get("directory", cls.directory)), formats, every, viewport)


@dataclass(frozen=True)
class RunConfig:
    multiplier: MultiplierSymbol
    patches: Tuple[PatchSpec, ...]
    solver: SolverConfig = SolverConfig()
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    kernel: KernelConfig = KernelConfig()
    output: OutputConfig = OutputConfig()

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - {"multiplier", "patches", "solver", "diagnostics", "kernel", "output"}
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        if "multiplier" not in data or "patches" not in data:
            raise ConfigError("configuration needs 'multiplier' and 'patches'")
        try:
            sym = MultiplierSymbol.from_descriptor(data["multiplier"])
        except PatchFlowError as e:
            raise ConfigError(f"multiplier: {e}") from e
        patches = data["patches"]
        if not isinstance(patches, list) or not patches:
            raise ConfigError("'patches' must be a nonempty list")
        config = cls(
            sym,
            tuple(PatchSpec.from_dict(p, i) for i, p in enumerate(patches)),
            SolverConfig.from_dict(data),
            DiagnosticsConfig.from_dict(data),
            KernelConfig.from_dict(data),
            OutputConfig.from_dict(data),
        )
        if config.solver.target_nodes < 64:
            raise ConfigError("solver.target_nodes must be >= 64")
        config.curves()
        config.step_config()
        return config

    def curves(self):
        """initial curves, checked to be pairwise apart by at least 10 node spacings"""
        n = self.solver.target_nodes
        try:
            curves = tuple(p.build(n, i) for i, p in enumerate(self.patches))
        except PatchFlowError as e:
            raise ConfigError(f"patches: {e}") from e
        spacing = max(float(node_spacing(c).max()) for c in curves)
        for i in range(len(curves)):
            for j in range(i + 1, len(curves)):
                if min_distance(curves[i], curves[j]) < MARGIN_SPACINGS * spacing:
                    raise ConfigError(f"patches {i} and {j} are closer than {MARGIN_SPACINGS:g} node spacings")
        return curves

    def step_config(self):
        s = self.solver
        return StepConfig(s.dt, s.t_end, s.reparam_every, s.target_nodes, s.quad_window, self.output.snapshot_every, self.diagnostics.cadence, s.cfl, s.curvature_weight)

    def initial_state(self, table, profile=None):
        return SimulationState(self.curves(), 0.0, table, profile, np.array(self.diagnostics.tracers, dtype=float).reshape(-1, 2), self.solver.quad_window)

    def as_dict(self):
        d = self.diagnostics
        return {
            "multiplier": self.multiplier.descriptor(),
            "patches": [p.as_dict() for p in self.patches],
            "solver": {k: getattr(self.solver, k) for k in ("dt", "t_end", "target_nodes", "reparam_every", "quad_window", "cfl", "curvature_weight")},
            "diagnostics": {
                "cadence": d.cadence,
                "gamma_list": list(d.gamma_list),
                "max_k": d.max_k,
                "tracers": [list(p) for p in d.tracers],
                "tracer_pairs": [list(p) for p in d.tracer_pairs],
            },
            "kernel": {"rho_min": self.kernel.rho_min, "rho_max": self.kernel.rho_max, "tol": self.kernel.tol},
            "output": {
                "directory": self.output.directory,
                "formats": list(self.output.formats),
                "snapshot_every": self.output.snapshot_every,
                "viewport": None if self.output.viewport is None else list(self.output.viewport),
            },
        }


def load_config(path):
    """Parse a JSON config file; malformed JSON raises ConfigError naming line and column"""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    return RunConfig.from_dict(data)
