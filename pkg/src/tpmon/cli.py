"""Command-line entry point: ``tpmon {simulate,steady,calibrate,allocate}``.

Exit codes: 0 success, 1 usage or validation error, 2 numerical or
calibration failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .alloc import ControlTarget, describe_mapping, exhaustive_allocate, greedy_allocate
from .errors import CalibrationError, DomainError, StabilityError, TpmonError
from .scenario import (
    emit_csv,
    format_summary,
    load_scenario,
    load_targets,
    params_document,
    run_simulation,
    steady_power,
)
from .thermal import TARGET_NAMES, calibrate, calibration_residuals, steady_state

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tpmon", description="Emulated tile power/temperature monitor.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a scenario and write the series CSV")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--steps", type=int, help="override duration_steps")

    p = sub.add_parser("steady", help="print steady-state core temperatures")
    p.add_argument("--scenario", required=True, type=Path)

    p = sub.add_parser("calibrate", help="fit RC parameters to target temperatures")
    p.add_argument("--targets", required=True, type=Path)
    p.add_argument("--g-amb", type=float, default=0.1, help="ambient conductance scale, W/degC")
    p.add_argument("--tau", type=float, default=5e-3, help="node time constant, s")
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("allocate", help="map the scenario's tasks onto cores")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--target", required=True, choices=[t.value for t in ControlTarget])
    p.add_argument("--method", default="exhaustive", choices=["exhaustive", "greedy"])
    return parser


def _temps_line(temps) -> str:
    return " ".join(f"{t:.6f}" for t in temps)


def cmd_simulate(args, out):
    cfg = load_scenario(args.scenario)
    if args.steps is not None and args.steps < 1:
        raise UsageError("--steps must be >= 1")
    result = run_simulation(cfg, args.steps)
    emit_csv(result, args.out)
    print(format_summary(result), file=out)


def cmd_steady(args, out):
    cfg = load_scenario(args.scenario)
    fp = cfg.floorplan
    temps = steady_state(cfg.network, steady_power(cfg))
    for i, t in enumerate(temps):
        c = fp.core(i)
        print(f"core {i} tile {c.tile} row {c.row} col {c.col} temp_c {t:.6f}", file=out)
    print(f"global_max_temp_c {temps.max():.6f}", file=out)


def _residual_table(residuals) -> str:
    rows = [f"{'target':<26}{'residual_c':>14}"]
    for name in TARGET_NAMES:
        value = residuals.get(name, math.nan)
        rows.append(f"{name:<26}{value:>14.6f}")
    return "\n".join(rows)


def cmd_calibrate(args, out):
    targets = load_targets(str(args.targets), Path("."))
    params, levels = calibrate(targets, g_amb_scale=args.g_amb, tau=args.tau)
    residuals = calibration_residuals(targets, params, levels)
    doc = params_document(params, levels, targets, residuals)
    args.out.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    r = params.g_lat / params.g_amb
    print(f"t_amb_c {params.t_amb:.6f}", file=out)
    print(f"g_lat_over_g_amb {r:.6f}", file=out)
    for name in ("p_low", "p_med", "p_high"):
        print(f"{name}_w {getattr(levels, name):.6f}", file=out)
    print(_residual_table(residuals), file=out)


def cmd_allocate(args, out):
    cfg = load_scenario(args.scenario)
    target = ControlTarget(args.target)
    fn = exhaustive_allocate if args.method == "exhaustive" else greedy_allocate
    net = cfg.network
    fp = cfg.floorplan
    mapping, score = fn(cfg.tasks, net, cfg.levels, target)
    levels = cfg.tasks.by_id()
    print(f"target {target.value} method {args.method}", file=out)
    for tid, core, i in describe_mapping(mapping, fp):
        print(
            f"task {tid} level {levels[tid].level.value} -> core {i} "
            f"(tile {core.tile} row {core.row} col {core.col})",
            file=out,
        )
    for t in range(fp.n_tiles):
        temps = score.temps[fp.tile_slice(t)]
        print(f"tile {t} temps_c {_temps_line(temps)} spread_c {score.tile_spreads[t]:.6f}", file=out)
    print(f"global_max_temp_c {score.global_max:.6f}", file=out)
    print(f"max_tile_spread_c {score.max_spread:.6f}", file=out)
    print(f"objective {score.objective:.6f}", file=out)


COMMANDS = {
    "simulate": cmd_simulate,
    "steady": cmd_steady,
    "calibrate": cmd_calibrate,
    "allocate": cmd_allocate,
}


def cli_main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"tpmon: error: {exc}", file=err)
        return EXIT_USAGE
    except CalibrationError as exc:
        print(f"tpmon: calibration failed: {exc}", file=err)
        print(_residual_table(exc.residuals), file=out)
        return EXIT_NUMERIC
    except (StabilityError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"tpmon: numerical failure: {exc}", file=err)
        return EXIT_NUMERIC
    except (DomainError, TpmonError) as exc:
        print(f"tpmon: error: {exc}", file=err)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
