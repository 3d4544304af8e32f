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
import math
import os
from tempfile import TemporaryDirectory

RUN = {
    "multiplier": {"family": "euler"},
    "patches": [{"shape": "circle", "radius": 1.0}],
    "solver": {"dt": 0.05, "t_end": 0.0, "target_nodes": 64},
    "kernel": {"rho_min": 1e-6, "rho_max": 1e2},
    "diagnostics": {"tracers": [[0.2, 0.0], [0.5, 0.0]], "tracer_pairs": [[0, 1]]},
}


def _write(directory, name, data):
    path = os.path.join(directory, name)
    with open(path, "w") as f:
        f.write(data if isinstance(data, str) else json.dumps(data))
    return path


class TestClassify:
    def test_json_output(self, capsys):
        from patchflow.cli import main

        assert main(["classify", '{"family": "alpha_sqg", "alpha": 0.5}']) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["symbol"] == {"family": "alpha_sqg", "alpha": 0.5}
        assert out["hypotheses"]["h2_class"] == "H2b"
        assert out["hypotheses"]["osgood"] == "Fails"
        assert "constants" not in out

    def test_family_name_and_constants(self, capsys):
        from patchflow.cli import main

        assert main(["classify", "euler", "--constants"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["hypotheses"]["h2_class"] == "H2c"
        assert out["mikhlin"]["passed"] is True
        assert "doubling" in out["constants"]

    def test_descriptor_file(self, capsys):
        from patchflow.cli import main

        with TemporaryDirectory() as td:
            path = _write(td, "run.json", RUN)
            assert main(["classify", path]) == 0
        assert json.loads(capsys.readouterr().out)["symbol"] == {"family": "euler"}

    def test_bad_symbol_is_config_error(self):
        from patchflow.cli import main

        assert main(["classify", '{"family": "alpha_sqg", "alpha": 3.0}']) == 1
        assert main(["classify", '{"family": ']) == 1
        assert main(["classify", "navier_stokes"]) == 1


class TestKernelTable:
    def test_csv(self, capsys):
        from patchflow.cli import main

        assert main(["kernel-table", "euler", "--rho-min", "1e-4", "--rho-max", "10", "--orders", "1"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# ")
        meta = json.loads(lines[0][2:])
        assert meta["symbol"] == {"family": "euler"}
        rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
        assert list(rows[0]) == ["rho", "G", "G1", "Rtilde"]
        assert len(rows) == meta["points"]
        for row in rows:
            assert math.isclose(float(row["G"]), 1.0 / (2.0 * math.pi), rel_tol=1e-10)
            rho = float(row["rho"])
            assert math.isclose(float(row["Rtilde"]), -math.log(rho) / (2.0 * math.pi), rel_tol=1e-8, abs_tol=1e-12)

    def test_bad_range(self):
        from patchflow.cli import main

        assert main(["kernel-table", "euler", "--rho-min", "1", "--rho-max", "0.1"]) == 1


class TestEnvelope:
    def test_envelope_csv(self, capsys):
        from patchflow.cli import main

        assert main(["envelope", "euler", "--C", "1", "--t-end", "0.5", "--points", "3"]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert [float(r["t"]) for r in rows] == [0.0, 0.25, 0.5]
        assert float(rows[0]["flow_lower"]) == 0.01
        assert math.isclose(float(rows[2]["flow_lower"]), 0.01 ** math.exp(0.5), rel_tol=1e-8)
        assert math.isclose(float(rows[2]["separation_lower"]), 0.05 ** math.exp(0.5), rel_tol=1e-8)

    def test_tables(self, capsys):
        from patchflow.cli import main

        assert main(["envelope", "euler", "--table", "--r-min", "4", "--r-max", "1e6", "--points", "5"]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 5
        r = float(rows[-1]["r"])
        assert math.isclose(float(rows[-1]["H"]), math.log(math.log(r)) - math.log(math.log(2.0)), rel_tol=1e-8)

    def test_fast_growth_reaches_zero(self, capsys):
        from patchflow.cli import main

        assert main(["envelope", '{"family": "loglog_euler", "beta": 1.0}', "--C", "10", "--t-end", "1", "--points", "3"]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 3
        assert float(rows[-1]["flow_lower"]) == 0.0
        assert float(rows[-1]["separation_lower"]) == 0.0
        assert math.isfinite(float(rows[-1]["flow_upper"]))

    def test_bounded_symbol_reports_horizon(self, capsys):
        from patchflow.cli import main

        assert main(["envelope", '{"family": "alpha_sqg", "alpha": 0.5}', "--t-end", "50", "--points", "6"]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert float(rows[-1]["flow_lower"]) == 0.0


class TestSimulateAndDiagnose:
    def test_malformed_config(self):
        from patchflow.cli import main

        with TemporaryDirectory() as td:
            path = _write(td, "run.json", '{"multiplier": {"family": "euler"},')
            assert main(["simulate", path]) == 1

    def test_zero_time_run(self, capsys):
        from patchflow.cli import main

        with TemporaryDirectory() as td:
            config = _write(td, "run.json", RUN)
            out = os.path.join(td, "out")
            assert main(["simulate", config, "--output", out]) == 0
            assert sorted(os.listdir(out)) == ["diagnostics.csv", "run_meta.json", "snapshots"]
            snapshot = os.path.join(out, "snapshots", "0000.json")
            assert os.path.exists(snapshot)
            with open(os.path.join(out, "run_meta.json")) as f:
                meta = json.load(f)
            assert meta["halted"] is None
            assert meta["config"]["output"]["directory"] == out

            capsys.readouterr()
            assert main(["diagnose", snapshot, "--gamma", "0.5", "--pair", "0,1"]) == 0
            (row,) = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
            assert abs(float(row["holder_k1_g0.5"]) - 1.41421) < 1e-5
            assert math.isclose(float(row["pair0"]), 0.3)

            assert main(["diagnose", snapshot, "--pair", "0,5"]) == 1

    def test_halt_exit_code(self, monkeypatch):
        from patchflow import cli
        from patchflow.utils import SolverHalt

        def halted(args):
            raise SolverHalt("contact")

        monkeypatch.setattr(cli, "cmd_simulate", halted)
        assert cli.main(["simulate", "unused.json"]) == 2

    def test_other_failure_exit_code(self, monkeypatch):
        from patchflow import cli
        from patchflow.utils import HankelConvergenceError

        def diverged(args):
            raise HankelConvergenceError("no convergence")

        monkeypatch.setattr(cli, "cmd_classify", diverged)
        assert cli.main(["classify", "euler"]) == 3

    def test_unexpected_exception_exit_code(self, monkeypatch):
        from patchflow import cli

        def overflow(args):
            raise OverflowError("math range error")

        def unreadable(args):
            raise OSError("disk full")

        monkeypatch.setattr(cli, "cmd_envelope", overflow)
        assert cli.main(["envelope", "euler"]) == 3
        monkeypatch.setattr(cli, "cmd_kernel_table", unreadable)
        assert cli.main(["kernel-table", "euler"]) == 3
