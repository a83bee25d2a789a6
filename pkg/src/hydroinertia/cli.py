"""Command-line front end.

Subcommands:

* ``table1``: closed-form plant-level report (mean inertial power for
  the reference fleet cases) as CSV on stdout.
* ``run CONFIG``: simulate one scenario file; writes the time-series
  CSV, window metrics, and optionally an SVG plot.
* ``sweep --kd 0,4,8 CONFIG``: same scenario under several derivative
  gains, run concurrently; writes per-run outputs, an overlay plot and
  a comparison table.
* ``check CONFIG``: parse and validate only.

Exit codes: 0 success, 1 usage, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .analytics import (
    format_reference_table,
    reference_table_csv,
    reference_table_rows,
)
from .config import load_config, serialize_config
from .engine import Metrics, Scenario, SimulationResult, extract_metrics, run_scenario
from .errors import ConfigError, HydroInertiaError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hydroinertia",
                     description="Reduced-order hydro inertia simulations")
    sub = parser.add_subparsers(dest="command", required=True)

    p_table = sub.add_parser("table1", help="closed-form fleet report")
    p_table.add_argument("--pretty", action="store_true",
                         help="aligned text instead of CSV")

    p_run = sub.add_parser("run", help="simulate one scenario file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=".", metavar="DIR",
                       help="output directory (default: current)")
    p_run.add_argument("--dt", type=float, default=None, metavar="S",
                       help="override the integration step [s]")
    p_run.add_argument("--plot", action="store_true",
                       help="write an SVG alongside the CSV")

    p_sweep = sub.add_parser("sweep",
                             help="run one scenario under several SI gains")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--kd", required=True, metavar="LIST",
                         help="comma-separated derivative gains [s]")
    p_sweep.add_argument("--out", default=".", metavar="DIR")

    p_check = sub.add_parser("check", help="validate a scenario file")
    p_check.add_argument("config")
    p_check.add_argument("--echo", action="store_true",
                         help="print the normalized form after validation")
    return parser


def _metric_rows(metrics: Metrics) -> list[tuple]:
    rows = []
    for w in metrics.windows:
        if not w.available:
            rows.append((w.name, w.kind, "", "", "", ""))
        elif w.kind == "mean_power":
            rows.append((w.name, w.kind, w.value_mw, "MW", "", ""))
        elif w.kind == "rocof":
            rows.append((w.name, w.kind, w.value_hz_s, "Hz/s", "", ""))
        else:
            rows.append((w.name, w.kind, w.value_hz, "Hz",
                         w.amplitude_mw, w.decay_ratio))
    rows.append(("speed_min", "extremum", metrics.speed_min_rpm, "rpm",
                 "", ""))
    rows.append(("speed_max", "extremum", metrics.speed_max_rpm, "rpm",
                 "", ""))
    return rows


def _metrics_csv(metrics: Metrics) -> str:
    lines = ["window,kind,value,unit,amplitude_mw,decay_ratio"]
    for row in _metric_rows(metrics):
        lines.append(",".join(
            f"{v:.9g}" if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _run_one(scenario: Scenario) -> tuple[SimulationResult, Metrics]:
    result = run_scenario(scenario)
    return result, extract_metrics(result)


def _cmd_table1(args) -> int:
    rows = reference_table_rows()
    if args.pretty:
        sys.stdout.write(format_reference_table(rows))
    else:
        sys.stdout.write(reference_table_csv(rows))
    return 0


def _cmd_run(args) -> int:
    scenario = load_config(args.config)
    if args.dt is not None:
        try:
            scenario = replace(scenario, dt_s=args.dt)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    result, metrics = _run_one(scenario)
    base = os.path.join(args.out, scenario.name)
    _write(base + ".csv", result.to_csv())
    metrics_text = _metrics_csv(metrics)
    _write(base + "_metrics.csv", metrics_text)
    if result.events:
        _write(base + "_events.txt", result.event_log())
    if args.plot:
        from .plotting import emit_plot

        emit_plot(result, path=base + ".svg")
    sys.stdout.write(metrics_text)
    return 0


def _cmd_sweep(args) -> int:
    try:
        gains = [float(v) for v in args.kd.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise _UsageError(f"--kd expects numbers, got '{args.kd}'") from exc
    if not gains:
        raise _UsageError("--kd expects at least one gain")
    base_scenario = load_config(args.config)
    scenarios = [
        replace(base_scenario,
                name=f"{base_scenario.name}_kd{g:g}",
                controller=replace(base_scenario.controller, si_gain_s=g))
        for g in gains]
    os.makedirs(args.out, exist_ok=True)
    with ThreadPoolExecutor(max_workers=len(scenarios)) as pool:
        outcomes = list(pool.map(_run_one, scenarios))

    lines = ["kd_s,window,kind,value,unit,amplitude_mw,decay_ratio"]
    for gain, (result, metrics) in zip(gains, outcomes):
        _write(os.path.join(args.out, result.scenario.name + ".csv"),
               result.to_csv())
        for row in _metric_rows(metrics):
            lines.append(f"{gain:.9g}," + ",".join(
                f"{v:.9g}" if isinstance(v, float) else str(v) for v in row))
    comparison = "\n".join(lines) + "\n"
    _write(os.path.join(args.out, base_scenario.name + "_sweep_metrics.csv"),
           comparison)

    from .plotting import emit_overlay

    emit_overlay([r for r, _ in outcomes],
                 [f"K_d = {g:g} s" for g in gains],
                 "p_unit_mw",
                 os.path.join(args.out, base_scenario.name + "_sweep.svg"))
    sys.stdout.write(comparison)
    return 0


def _cmd_check(args) -> int:
    scenario = load_config(args.config)
    steps = round(scenario.duration_s / scenario.dt_s)
    sys.stdout.write(f"ok: {scenario.name} ({steps} steps)\n")
    if args.echo:
        sys.stdout.write(serialize_config(scenario))
    return 0


_COMMANDS = {
    "table1": _cmd_table1,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except NotImplementedError as exc:
        sys.stderr.write(f"not implemented: {exc}\n")
        return 3
    except HydroInertiaError as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
