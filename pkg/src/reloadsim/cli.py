"""Command-line entry point: ``reloadsim <subcommand> ...``."""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .analysis import utilization_bounds
from .calibration import CalibrationError, calibrate_workload, shipped_problem
from .engine import SimulationError, run_schedule, simulate
from .metrics import MetricsError
from .report import gantt_svg, summary_md, sweep_csv, sweep_md, trace_csv
from .sweep import WIDE, SweepError, sweep_overlay, sweep_reload
from .timebase import TimeError, format_duration, format_number, parse_duration
from .workload import (
    StrategyConfig,
    WorkloadConfig,
    WorkloadError,
    builtin_setup,
    load_workload,
    parse_latency_table,
)

PROG = "reloadsim"
OUT_DIR_ENV = "RELOADSIM_OUT_DIR"
DEFAULT_OVERHEADS = "20ms,4ms,1ms,0.2ms,0ms"
DEFAULT_SCALES = "1,1.5,2,wide"

EXIT_OK, EXIT_ERROR, EXIT_DIVERGENT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{PROG}: error: {message}\n")


def _duration(text: str) -> Fraction:
    try:
        return parse_duration(text)
    except TimeError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _durations(text: str) -> list[Fraction]:
    return [_duration(part) for part in text.split(",") if part.strip()]


def _scale(text: str):
    text = text.strip()
    if text.lower() in (WIDE, "wide-spectrum"):
        return WIDE
    try:
        value = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad overlay scale {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"overlay scale must be >= 1, got {text}")
    return value


def _scales(text: str):
    return [_scale(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    source = argparse.ArgumentParser(add_help=False)
    group = source.add_mutually_exclusive_group(required=True)
    group.add_argument("--setup", help="builtin setup id(s), comma separated (A, B, C, D)")
    group.add_argument("--workload", type=Path, help="workload JSON file")
    source.add_argument("--latency-table", type=Path, help="override the shipped latency table")
    source.add_argument("--horizon", type=int, help="horizon in hyperperiods")
    source.add_argument("--warmup", type=int, help="warmup in hyperperiods")

    strategy = argparse.ArgumentParser(add_help=False)
    strategy.add_argument("--strategy", default=None,
                          help="overlay, customized, or a comma list of both")
    strategy.add_argument("--reload", type=_duration, help="reload overhead, e.g. 20ms")
    strategy.add_argument("--scale", type=_scale, help="overlay throughput scale (>= 1) or 'wide'")
    strategy.add_argument("--wide-spectrum", action="store_true", help="wide-spectrum overlay")

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--out-dir", type=Path,
                        help=f"directory for artifacts (default ${OUT_DIR_ENV} or .)")
    output.add_argument("--stamp", action="store_true", help="add a generation timestamp to reports")
    output.add_argument("--no-plots", action="store_true", help="skip matplotlib figures")

    parser = _Parser(prog=PROG, description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[source, strategy, output], help="run the simulator")
    p.add_argument("--trace-csv", type=Path, help="write the trace CSV here (single run only)")
    p.add_argument("--fail-on-divergent", action="store_true", help="exit 2 on a Divergent verdict")

    sub.add_parser("analyze", parents=[source, strategy], help="utilization bounds and quick verdict")

    p = sub.add_parser("sweep-reload", parents=[source, output], help="reload-overhead sensitivity")
    p.add_argument("--overheads", type=_durations, default=_durations(DEFAULT_OVERHEADS))
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("sweep-overlay", parents=[source, output], help="overlay-throughput sensitivity")
    p.add_argument("--scales", type=_scales, default=_scales(DEFAULT_SCALES))
    p.add_argument("--baseline-reload", type=_duration, default=_duration("0.2ms"))
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("gantt", parents=[source, strategy, output], help="write an SVG timeline")
    p.add_argument("--output", type=Path, help="SVG path (default <out-dir>/<workload>.svg)")
    p.add_argument("--start", type=_duration, default=Fraction(0))
    p.add_argument("--end", type=_duration, help="window end (default: first hyperperiod)")

    p = sub.add_parser("calibrate", parents=[output], help="refit the shipped latency table to its busy-ratio targets")
    p.add_argument("--output", type=Path, help="latency table path (default <out-dir>/latency_table.json)")

    p = sub.add_parser("validate", help="check a workload or latency-table file")
    p.add_argument("path", type=Path)
    p.add_argument("--latency-table", action="store_true", help="validate as a latency table")
    return parser


# -- helpers ---------------------------------------------------------------

def _out_dir(args) -> Path:
    out = args.out_dir or Path(os.environ.get(OUT_DIR_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stamp_line(args) -> str:
    if not getattr(args, "stamp", False):
        return ""
    return f"<!-- generated {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')} -->\n"


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _explicit_strategy(args) -> bool:
    return bool(args.strategy or args.reload is not None or args.scale is not None
                or args.wide_spectrum or args.workload is None)


def _strategies(args) -> list[StrategyConfig]:
    names = (args.strategy or "").split(",") if args.strategy else []
    if not names:
        names = ["customized" if args.reload is not None else "overlay"]
    out = []
    for name in names:
        name = name.strip()
        if name == "overlay":
            scale = args.scale if args.scale is not None else Fraction(1)
            wide = args.wide_spectrum or scale == WIDE
            out.append(StrategyConfig.overlay(1 if scale == WIDE else scale, wide_spectrum=wide))
        elif name == "customized":
            if args.reload is None:
                raise UsageError("--strategy customized needs --reload (e.g. --reload 20ms)")
            out.append(StrategyConfig.customized(args.reload))
        else:
            raise UsageError(f"unknown strategy {name!r} (expected overlay or customized)")
    return out


def _workloads(args, strategy: Optional[StrategyConfig] = None) -> list[WorkloadConfig]:
    """Workloads named by --setup/--workload, optionally with ``strategy`` swapped in."""
    table = None
    if args.latency_table is not None:
        table = parse_latency_table(_read(args.latency_table))
    if args.workload is not None:
        base = [load_workload(_read(args.workload))]
    else:
        ids = [s.strip().upper() for s in args.setup.split(",") if s.strip()]
        if not ids:
            raise UsageError("--setup needs at least one setup id")
        placeholder = StrategyConfig.overlay()
        base = [builtin_setup(i, placeholder, table) for i in ids]
    out = []
    for w in base:
        if args.horizon is not None:
            w = replace(w, horizon_hyperperiods=args.horizon)
        if args.warmup is not None:
            w = replace(w, warmup_hyperperiods=args.warmup)
        if strategy is not None:
            w = w.with_strategy(strategy)
        out.append(w)
    return out


def _emit(text: str):
    sys.stdout.write(text)


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    strategies = _strategies(args) if _explicit_strategy(args) else [None]
    runs = []
    for strategy in strategies:
        for w in _workloads(args, strategy):
            runs.append((w, simulate(w)))
    divergent = False
    for w, r in runs:
        tag = "Sustainable" if r.sustainable else "Divergent (Fail)"
        divergent |= not r.sustainable
        _emit(
            f"{w.name} {w.strategy.label}: busy_ratio={float(r.busy_ratio):.3f} "
            f"exec_ratio={float(r.exec_ratio):.3f} reload_ratio={float(r.reload_ratio):.3f} "
            f"verdict={tag}\n"
        )
    if args.trace_csv is not None:
        if len(runs) != 1:
            raise UsageError("--trace-csv needs exactly one run")
        args.trace_csv.write_text(trace_csv(runs[0][1].trace))
    rows = [(w.name, w.strategy.label, r) for w, r in runs]
    table = _stamp_line(args) + summary_md(rows)
    if len(runs) > 1:
        _emit("\n" + table)
    if args.out_dir is not None or os.environ.get(OUT_DIR_ENV):
        out = _out_dir(args)
        (out / "busy_summary.md").write_text(table)
        if not args.no_plots:
            from .plotting import plot_busy_summary

            plot_busy_summary(rows, out / "busy_summary.png")
    if divergent and args.fail_on_divergent:
        return EXIT_DIVERGENT
    return EXIT_OK


def cmd_analyze(args) -> int:
    strategies = _strategies(args) if _explicit_strategy(args) else [None]
    for strategy in strategies:
        for w in _workloads(args, strategy):
            b = utilization_bounds(w)
            _emit(
                f"{w.name} {w.strategy.label}: lower={float(b.lower):.4f} upper={float(b.upper):.4f} "
                f"blocking={float(b.blocking):.4f} verdict={b.verdict.value}\n"
            )
    return EXIT_OK


def _write_sweep(args, reports, stem: str) -> int:
    table = _stamp_line(args) + sweep_md(reports)
    _emit(table)
    out = _out_dir(args)
    (out / f"{stem}.csv").write_text(sweep_csv(reports))
    (out / f"{stem}.md").write_text(table)
    if not args.no_plots:
        from .plotting import plot_sweep

        plot_sweep(reports, out / f"{stem}.png")
    return EXIT_OK


def cmd_sweep_reload(args) -> int:
    reports = [
        sweep_reload(w, args.overheads, workers=args.workers)
        for w in _workloads(args, StrategyConfig.customized(0))
    ]
    return _write_sweep(args, reports, "sweep_reload")


def cmd_sweep_overlay(args) -> int:
    reports = [
        sweep_overlay(w, args.scales, args.baseline_reload, workers=args.workers)
        for w in _workloads(args)
    ]
    return _write_sweep(args, reports, "sweep_overlay")


def cmd_gantt(args) -> int:
    strategies = _strategies(args) if _explicit_strategy(args) else [None]
    if len(strategies) != 1:
        raise UsageError("gantt renders one strategy at a time")
    workloads = _workloads(args, strategies[0])
    if len(workloads) != 1:
        raise UsageError("gantt renders one workload at a time")
    w = workloads[0]
    end = args.end if args.end is not None else w.hyperperiod
    if end <= args.start:
        raise UsageError("--end must be after --start")
    svg = gantt_svg(run_schedule(w), window=(args.start, end))
    path = args.output or _out_dir(args) / f"{w.name}-{w.strategy.label.replace('@', '_')}.svg"
    path.write_text(svg)
    _emit(f"wrote {path}\n")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cal = calibrate_workload(shipped_problem())
    path = args.output or _out_dir(args) / "latency_table.json"
    path.write_text(cal.to_json())
    for model, (o, c) in cal.table.items():
        _emit(f"{model:12s} overlay={format_duration(o):>14s} customized={format_duration(c):>14s}\n")
    _emit("\n| target | relation | value | achieved | residual/tol |\n|---|---|---|---|---|\n")
    for r in cal.soft():
        _emit(f"| {r.label} | {r.relation} | {r.target:g} | {r.achieved:.4f} | {r.scaled:+.3f} |\n")
    _emit(f"\nobjective={cal.objective:.6f}; all hard constraints satisfied; wrote {path}\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    text = _read(args.path)
    if args.latency_table:
        table = parse_latency_table(text)
        _emit(f"ok: latency table with {len(table)} models\n")
        return EXIT_OK
    w = load_workload(text)
    _emit(
        f"ok: {w.name} ({len(w.tasks)} tasks, strategy {w.strategy.label}, "
        f"hyperperiod {format_number(w.hyperperiod)}s)\n"
    )
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "sweep-reload": cmd_sweep_reload,
    "sweep-overlay": cmd_sweep_overlay,
    "gantt": cmd_gantt,
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, WorkloadError, TimeError, CalibrationError, SweepError,
            MetricsError, SimulationError, OverflowError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
