# *****************************************************************************
#
# Copyright (c) 2026, the patchflow authors.
#
# This file is part of the patchflow library, distributed under the terms of
# the Apache License 2.0.  The full license can be found in the LICENSE file.
#
"""Command line: simulate, classify, kernel-table, envelope, diagnose.

Exit codes: 0 success, 1 configuration or JSON error, 2 solver halt, 3 any other failure.
"""

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys

import numpy as np

from .config import load_config
from .contour import run
from .diagnostics import diagnostic_rows
from .kernel import build_table
from .multiplier import MultiplierSymbol, check_mikhlin, classify, property_constants
from .osgood import OsgoodProfile, envelope_flow_bound, envelope_separation, h_eval, h_tilde_eval, script_h
from .output import RunArtifacts, read_snapshot, rows_to_csv
from .utils import ConfigError, PatchFlowError, SolverHalt, SymbolError, dumps_json, finite_or_tag

logger = logging.getLogger(__name__)

__all__ = ("main",)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HALT = 2
EXIT_FAILURE = 3


def _descriptor(text):
    """A symbol descriptor given inline as JSON, as a path to a JSON file, or as a bare family name"""
    source = "<argument>"
    if os.path.isfile(text):
        source = text
        with open(text) as f:
            text = f.read()
    if source == "<argument>" and not text.lstrip().startswith("{"):
        data = {"family": text.strip()}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{source}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    if isinstance(data, dict) and "multiplier" in data:
        data = data["multiplier"]
    try:
        return MultiplierSymbol.from_descriptor(data)
    except SymbolError as e:
        raise ConfigError(f"{source}: {e}") from e


def _emit(text, path=None):
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return out.getvalue()


################################################################################
# Subcommands
################################################################################


def cmd_simulate(args):
    config = load_config(args.config)
    if args.output:
        config = dataclasses.replace(config, output=dataclasses.replace(config.output, directory=args.output))
    k = config.kernel
    table = build_table(config.multiplier, (k.rho_min, k.rho_max), k.tol)
    report = classify(config.multiplier)
    logger.info("%s: %s, Osgood %s", config.multiplier, report.h2_class, report.osgood)
    artifacts = RunArtifacts(config)
    d = config.diagnostics
    trajectory = run(
        config.initial_state(table),
        config.step_config(),
        gammas=d.gamma_list,
        max_k=d.max_k,
        tracer_pairs=d.tracer_pairs,
        on_snapshot=artifacts.snapshot,
        on_record=artifacts.record,
    )
    artifacts.write_meta(table, report, trajectory)
    if trajectory.halted is not None:
        raise trajectory.halted
    return EXIT_OK


def cmd_classify(args):
    sym = _descriptor(args.symbol)
    report = classify(sym)
    out = {"symbol": sym.descriptor(), "hypotheses": report.to_dict(), "mikhlin": check_mikhlin(sym).to_dict()}
    if args.constants:
        out["constants"] = {k: finite_or_tag(v) for k, v in property_constants(sym).items()}
    _emit(dumps_json(out) + "\n", args.out)
    return EXIT_OK


def cmd_kernel_table(args):
    sym = _descriptor(args.symbol)
    table = build_table(sym, (args.rho_min, args.rho_max), args.tol)
    orders = list(range(args.orders + 1))
    header = ["rho"] + [("G" if l == 0 else f"G{l}") for l in orders] + ["Rtilde"]
    columns = [table.rho_grid] + [np.asarray(table.g(table.rho_grid, l)) for l in orders] + [table.rtilde_values]
    meta = {k: (finite_or_tag(v) if isinstance(v, float) else v) for k, v in table.metadata().items()}
    _emit("# " + json.dumps(meta, default=str) + "\n" + _csv(header, zip(*columns)), args.out)
    return EXIT_OK


def cmd_envelope(args):
    sym = _descriptor(args.symbol)
    profile = OsgoodProfile(sym, r0=args.r0)
    if args.table:
        r = np.geomspace(args.r_min, args.r_max, args.points)
        rows = [(x, h_eval(profile, x), h_tilde_eval(profile, x), script_h(profile, x)) for x in r]
        _emit(_csv(["r", "H", "H_tilde", "HH"], rows), args.out)
        return EXIT_OK
    times = np.linspace(0.0, args.t_end, args.points)
    rows = []
    for t in times:
        env = envelope_flow_bound(profile, args.sep0, t, args.C)
        rows.append((t, env.lower, env.upper, envelope_separation(profile, args.d0, t, args.C)))
    _emit(_csv(["t", "flow_lower", "flow_upper", "separation_lower"], rows), args.out)
    return EXIT_OK


def cmd_diagnose(args):
    gammas = tuple(args.gamma or (0.5,))
    pairs = tuple(args.pair or ())
    records = []
    for path in args.snapshots:
        state = read_snapshot(path)
        if any(max(p) >= len(state.tracers) for p in pairs):
            raise ConfigError(f"{path}: tracer pair out of range for {len(state.tracers)} tracers")
        records.append(diagnostic_rows(state, gammas=gammas, max_k=args.max_k, tracer_pairs=pairs))
    _emit(rows_to_csv(records), args.out)
    return EXIT_OK


################################################################################
# Entry point
################################################################################


def _pair(text):
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected i,j got {text!r}") from None
    if i < 0 or j < 0 or i == j:
        raise argparse.ArgumentTypeError("tracer indices must be distinct and >= 0")
    return (i, j)


def _parser():
    parser = argparse.ArgumentParser(prog="patchflow", description="Contour dynamics for active scalar patches under Fourier multipliers")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configuration and write its artifacts")
    p.add_argument("config", help="path to a JSON run configuration")
    p.add_argument("--output", help="override output.directory")
    p.set_defaults(func=cmd_simulate)

    symbol_help = "symbol descriptor: JSON text, a JSON file, or a family name"

    p = sub.add_parser("classify", help="hypothesis report of a symbol as JSON")
    p.add_argument("symbol", help=symbol_help)
    p.add_argument("--constants", action="store_true", help="include empirical structural constants")
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("kernel-table", help="tabulated G, its derivatives and R~ as CSV")
    p.add_argument("symbol", help=symbol_help)
    p.add_argument("--rho-min", type=float, default=1e-8)
    p.add_argument("--rho-max", type=float, default=1e3)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--orders", type=int, default=2, help="highest derivative order of G to emit")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kernel_table)

    p = sub.add_parser("envelope", help="flow and separation envelopes, or the H tables with --table")
    p.add_argument("symbol", help=symbol_help)
    p.add_argument("--C", type=float, default=1.0, help="envelope constant")
    p.add_argument("--sep0", type=float, default=1e-2, help="initial particle separation")
    p.add_argument("--d0", type=float, default=1e-1, help="initial patch distance")
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--points", type=int, default=51)
    p.add_argument("--r0", type=float, default=None)
    p.add_argument("--table", action="store_true", help="print H, H~ and HH on a log grid instead")
    p.add_argument("--r-min", type=float, default=1e-2)
    p.add_argument("--r-max", type=float, default=1e12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("diagnose", help="diagnostic rows of snapshot files as CSV")
    p.add_argument("snapshots", nargs="+")
    p.add_argument("--gamma", type=float, action="append", help="Hoelder exponent, repeatable")
    p.add_argument("--max-k", type=int, default=1)
    p.add_argument("--pair", type=_pair, action="append", help="tracer index pair i,j, repeatable")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except SolverHalt as e:
        logger.error("solver halted: %s", e)
        return EXIT_HALT
    except PatchFlowError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_FAILURE
    except Exception:
        logger.exception("unexpected failure")
        return EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
