# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Run artifacts: diagnostics.csv, snapshots/NNNN.json, snapshots/NNNN.svg, run_meta.json"""

import csv
import datetime
import io
import json
import logging
import os
import platform

import matplotlib
import numpy as np
import pytz
import scipy
from matplotlib.figure import Figure
from tzlocal import get_localzone

from .contour import PatchCurve, SimulationState
from .utils import ConfigError, atomic_write_bytes, atomic_write_text, dumps_json, finite_or_tag

logger = logging.getLogger(__name__)

__all__ = (
    "DiagnosticsWriter",
    "RunArtifacts",
    "now",
    "read_snapshot",
    "render_svg",
    "rows_to_csv",
    "snapshot_dict",
    "versions",
    "write_snapshot",
)

SNAPSHOT_FORMAT = 1


def now(tz=None):
    """timezone-aware wall clock; tz is a name, a tzinfo or None for the local zone"""
    tz = tz or get_localzone()
    if isinstance(tz, str):
        try:
            tz = pytz.timezone(tz)
        except pytz.UnknownTimeZoneError:
            raise ConfigError(f"unknown timezone {tz}") from None
    return datetime.datetime.now(tz=tz)


def versions():
    from . import __version__

    return {
        "patchflow": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def _csv_value(value):
    # floats through repr so re-reading is exact
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def rows_to_csv(records, header=True):
    """CSV text for DiagnosticRecord objects; all records must share the column layout"""
    out = io.StringIO()
    writer = None
    for record in records:
        if writer is None:
            writer = csv.DictWriter(out, fieldnames=record.columns(), lineterminator="\n")
            if header:
                writer.writeheader()
        for row in record.rows():
            writer.writerow({k: _csv_value(v) for k, v in row.items()})
    return out.getvalue()


class DiagnosticsWriter:
    """Appends DiagnosticRecord rows to a CSV file as they arrive"""

    def __init__(self, path):
        self.path = path
        self._header = False
        with open(path, "w", newline=""):
            pass

    def __call__(self, record):
        with open(self.path, "a", newline="") as f:
            f.write(rows_to_csv([record], header=not self._header))
        self._header = True


################################################################################
# Snapshots
################################################################################


def snapshot_dict(state, index=0):
    curves = [{"id": c.id, "strength": float(c.strength), "nodes": [[float(x), float(y)] for x, y in c.nodes]} for c in state.curves]
    out = {"format": SNAPSHOT_FORMAT, "index": int(index), "t": float(state.t), "curves": curves, "tracers": [[float(x), float(y)] for x, y in state.tracers]}
    if state.table is not None:
        out["symbol"] = state.table.sym.descriptor()
    return out


def write_snapshot(path, state, index=0):
    # json writes floats via repr: the shortest text that reads back to the same double
    atomic_write_text(path, dumps_json(snapshot_dict(state, index)))


def read_snapshot(path, table=None):
    """SimulationState from a snapshot file; the kernel table is only needed for velocities"""
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        curves = tuple(PatchCurve(np.array(c["nodes"], dtype=float), c.get("strength", 1.0), c.get("id", i)) for i, c in enumerate(data["curves"]))
        tracers = np.array(data.get("tracers", []), dtype=float).reshape(-1, 2)
        t = float(data.get("t", 0.0))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: not a snapshot ({e})") from e
    return SimulationState(curves, t, table, tracers=tracers)


def _viewport(state, margin=0.1):
    nodes = np.vstack([c.nodes for c in state.curves])
    lo, hi = nodes.min(axis=0), nodes.max(axis=0)
    pad = margin * float(np.max(hi - lo))
    return (lo[0] - pad, hi[0] + pad, lo[1] - pad, hi[1] + pad)


def render_svg(state, viewport=None):
    """SVG bytes of the patch boundaries and tracers; a pure function of the state"""
    xmin, xmax, ymin, ymax = viewport or _viewport(state)
    fig = Figure(figsize=(6, 6 * (ymax - ymin) / (xmax - xmin)))
    ax = fig.add_subplot()
    for curve in state.curves:
        closed = np.vstack((curve.nodes, curve.nodes[:1]))
        ax.fill(closed[:, 0], closed[:, 1], alpha=0.25, color="tab:blue" if curve.strength >= 0 else "tab:red")
        ax.plot(closed[:, 0], closed[:, 1], lw=0.8, color="k")
    if len(state.tracers):
        ax.plot(state.tracers[:, 0], state.tracers[:, 1], ".", ms=3, color="tab:orange")
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    ax.set_title(f"t = {state.t:.6g}")
    out = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": "patchflow", "svg.fonttype": "none"}):
        fig.savefig(out, format="svg", metadata={"Date": None})
    return out.getvalue()


class RunArtifacts:
    """Artifact layout of one `simulate` run under config.output.directory"""

    def __init__(self, config):
        self.config = config
        self.root = config.output.directory
        self.snapshots = os.path.join(self.root, "snapshots")
        os.makedirs(self.snapshots, exist_ok=True)
        self.diagnostics = DiagnosticsWriter(os.path.join(self.root, "diagnostics.csv"))
        self.started = now()

    def snapshot(self, index, state):
        base = os.path.join(self.snapshots, f"{index:04d}")
        if "json" in self.config.output.formats:
            write_snapshot(base + ".json", state, index)
        if "svg" in self.config.output.formats:
            atomic_write_bytes(base + ".svg", render_svg(state, self.config.output.viewport))
        logger.debug("snapshot %d at t=%g", index, state.t)

    def record(self, record):
        self.diagnostics(record)

    def write_meta(self, table, report, trajectory=None):
        meta = {
            "config": self.config.as_dict(),
            "versions": versions(),
            "kernel": {k: (finite_or_tag(v) if isinstance(v, float) else v) for k, v in table.metadata().items()},
            "classification": report.to_dict(),
            "threads": os.environ.get("PATCHFLOW_THREADS"),
            "started": self.started.isoformat(),
            "finished": now().isoformat(),
        }
        if trajectory is not None:
            final = trajectory.final
            meta["t_final"] = None if final is None else float(final.t)
            meta["snapshots"] = len(trajectory.snapshots)
            meta["halted"] = None if trajectory.halted is None else {"reason": type(trajectory.halted.cause).__name__, "message": str(trajectory.halted)}
        atomic_write_text(os.path.join(self.root, "run_meta.json"), dumps_json(meta))
