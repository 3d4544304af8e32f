# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
from .biot_savart import VelocityQuery, grad_u_sym, velocity, velocity_nodes, velocity_oracle, velocity_points
from .config import RunConfig, load_config
from .contour import PatchCurve, SimulationState, StepConfig, circle, ellipse, fourier_patch, polygon_patch, reparameterize, run, step
from .diagnostics import diagnostic_rows, envelope_check, flow_divergence, geometric_defect, holder_seminorm
from .kernel import KernelTable, build_table, g_eval, k_eval, r_tilde
from .multiplier import MultiplierSymbol, check_mikhlin, classify, evaluate, symbol
from .osgood import OsgoodProfile, envelope_flow_bound, envelope_separation, h_eval, h_inv
from .utils import (
    PATCHFLOW_CACHE_GLOBAL_DISABLE,
    ConfigError,
    ContactError,
    DegenerateCurveError,
    HankelConvergenceError,
    KernelRangeError,
    OrderError,
    OsgoodRangeError,
    PatchFlowError,
    SelfIntersectionError,
    SolverHalt,
    SymbolError,
    disable,
    enable,
)

__version__ = "0.1.0"
