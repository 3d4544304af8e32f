# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
import csv
import io
import json
import os
from tempfile import TemporaryDirectory

import numpy as np
import pytest


class TestSnapshots:
    def setup_method(self):
        from patchflow.contour import SimulationState, circle, ellipse
        from patchflow.kernel import build_table
        from patchflow.multiplier import symbol

        self.table = build_table(symbol("euler"), (1e-6, 1e2))
        curves = (circle(0.5, (-1.0, 0.0), n=64, id=0), ellipse(0.4, 0.2, (1.0, 0.0), 0.3, n=64, strength=-2.0, id="b"))
        self.state = SimulationState(curves, 0.125, self.table, tracers=[[0.1, 1.0 / 3.0]])

    def test_round_trip_is_exact(self):
        from patchflow.output import read_snapshot, write_snapshot

        with TemporaryDirectory() as td:
            path = os.path.join(td, "snapshots", "0003.json")
            write_snapshot(path, self.state, 3)
            with open(path) as f:
                data = json.load(f)
            assert data["format"] == 1
            assert data["index"] == 3
            assert data["symbol"] == {"family": "euler"}
            back = read_snapshot(path, self.table)
        assert back.t == 0.125
        assert [c.id for c in back.curves] == [0, "b"]
        assert back.curves[1].strength == -2.0
        for a, b in zip(back.curves, self.state.curves):
            assert np.array_equal(a.nodes, b.nodes)
        assert np.array_equal(back.tracers, self.state.tracers)

    def test_read_errors(self):
        from patchflow.output import read_snapshot
        from patchflow.utils import ConfigError

        with TemporaryDirectory() as td:
            bad = os.path.join(td, "bad.json")
            with open(bad, "w") as f:
                f.write("{")
            with pytest.raises(ConfigError):
                read_snapshot(bad)
            odd = os.path.join(td, "odd.json")
            with open(odd, "w") as f:
                json.dump({"t": 0.0}, f)
            with pytest.raises(ConfigError):
                read_snapshot(odd)
            with pytest.raises(ConfigError):
                read_snapshot(os.path.join(td, "missing.json"))

    def test_svg_is_deterministic(self):
        from patchflow.output import render_svg

        a = render_svg(self.state)
        b = render_svg(self.state)
        assert a == b
        assert b"<svg" in a
        assert render_svg(self.state, (-2.0, 2.0, -1.0, 1.0)) != a


class TestCsv:
    def test_rows(self):
        from patchflow.contour import SimulationState, circle
        from patchflow.diagnostics import diagnostic_rows
        from patchflow.output import DiagnosticsWriter, rows_to_csv

        state = SimulationState((circle(1.0, n=64),), 0.0, None)
        records = [diagnostic_rows(state), diagnostic_rows(state.replace(t=0.1))]
        text = rows_to_csv(records)
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 2
        assert rows[1]["t"] == "0.1"
        assert rows[0]["min_dist"] == "inf"
        assert float(rows[0]["holder_k1_g0.5"]) == records[0].rows()[0]["holder_k1_g0.5"]
        assert rows_to_csv([]) == ""

        with TemporaryDirectory() as td:
            path = os.path.join(td, "diagnostics.csv")
            writer = DiagnosticsWriter(path)
            for record in records:
                writer(record)
            with open(path) as f:
                assert f.read() == text


class TestMeta:
    def test_now_and_versions(self):
        from patchflow.output import now, versions
        from patchflow.utils import ConfigError

        assert now("UTC").utcoffset().total_seconds() == 0
        assert now().tzinfo is not None
        with pytest.raises(ConfigError):
            now("Mars/Olympus_Mons")
        v = versions()
        assert v["patchflow"] == "0.1.0"
        assert set(v) == {"patchflow", "python", "numpy", "scipy", "matplotlib"}

    def test_run_artifacts(self):
        from patchflow.config import RunConfig
        from patchflow.contour import Trajectory
        from patchflow.diagnostics import diagnostic_rows
        from patchflow.kernel import build_table
        from patchflow.multiplier import classify
        from patchflow.output import RunArtifacts

        with TemporaryDirectory() as td:
            config = RunConfig.from_dict(
                {
                    "multiplier": {"family": "euler"},
                    "patches": [{"shape": "circle"}],
                    "solver": {"dt": 0.1, "t_end": 0.0, "target_nodes": 64},
                    "kernel": {"rho_min": 1e-6, "rho_max": 1e2},
                    "output": {"directory": os.path.join(td, "run"), "formats": ["json", "svg"]},
                }
            )
            table = build_table(config.multiplier, (1e-6, 1e2))
            state = config.initial_state(table)
            artifacts = RunArtifacts(config)
            artifacts.snapshot(0, state)
            artifacts.record(diagnostic_rows(state))
            artifacts.write_meta(table, classify(config.multiplier), Trajectory(snapshots=[(0, state)]))
            root = os.path.join(td, "run")
            assert sorted(os.listdir(os.path.join(root, "snapshots"))) == ["0000.json", "0000.svg"]
            with open(os.path.join(root, "run_meta.json")) as f:
                meta = json.load(f)
            assert meta["config"]["multiplier"] == {"family": "euler"}
            assert meta["kernel"]["hash"] == table.digest
            assert meta["classification"]["osgood"] == "Holds"
            assert meta["snapshots"] == 1
            assert meta["t_final"] == 0.0
            assert meta["halted"] is None
            assert meta["kernel"]["rho_min"] == table.rho_min
            with open(os.path.join(root, "diagnostics.csv")) as f:
                assert f.readline().startswith("t,patch_id,area")
