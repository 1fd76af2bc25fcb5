"""Trace CSV, SVG Gantt charts and markdown tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

from .engine import Segment, SegmentKind, Trace
from .metrics import SimResult
from .sweep import FAIL, SweepReport
from .timebase import format_number, parse_number, to_ms

CSV_HEADER = ("kind", "start_s", "end_s", "task", "instance", "model")


# -- CSV --------------------------------------------------------------------

def trace_csv(trace: Trace) -> str:
    """One row per non-idle segment; times are exact decimals or fractions."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in sorted(trace.busy_segments(), key=lambda s: s.start):
        writer.writerow([
            s.kind.value,
            format_number(s.start),
            format_number(s.end),
            trace.task_names[s.task_index] if s.task_index is not None else "",
            "" if s.instance is None else s.instance,
            s.model_id or "",
        ])
    return buf.getvalue()


def parse_trace_csv(text: str, task_names: Sequence[str]) -> list[Segment]:
    """Inverse of :func:`trace_csv` for the non-idle segments."""
    index = {name: i for i, name in enumerate(task_names)}
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected trace CSV header {header!r}")
    out = []
    for row in reader:
        kind, start, end, task, instance, model = row
        out.append(Segment(
            SegmentKind(kind),
            parse_number(start),
            parse_number(end),
            index[task] if task else None,
            int(instance) if instance else None,
            model or None,
        ))
    return out


# -- SVG Gantt --------------------------------------------------------------

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


@dataclass(frozen=True)
class GanttStyle:
    """Layout for :func:`gantt_svg`; rows follow task order, times in ms."""

    px_per_ms: float = 4.0
    row_height: int = 28
    row_gap: int = 14
    margin_left: int = 110
    margin_top: int = 30
    margin_bottom: int = 40
    fills: tuple[str, ...] = PALETTE
    reload_fill: str = "url(#reload-hatch)"
    release_markers: bool = True
    deadline_markers: bool = True
    tick_ms: Optional[float] = None


def _arrow(x: float, y_top: float, y_bottom: float, down: bool, cls: str) -> str:
    tip, tail = (y_bottom, y_top) if down else (y_top, y_bottom)
    head = -5 if down else 5
    return (
        f'<path class="marker {cls}" d="M{x:.2f},{tail:.2f} L{x:.2f},{tip:.2f} '
        f'M{x - 3:.2f},{tip + head:.2f} L{x:.2f},{tip:.2f} L{x + 3:.2f},{tip + head:.2f}" />'
    )


def gantt_svg(
    trace: Trace,
    style: GanttStyle = GanttStyle(),
    window: Optional[tuple[Fraction, Fraction]] = None,
) -> str:
    """Render ``trace`` as an SVG timeline.

    Each non-idle segment overlapping the window becomes one ``rect`` of class
    ``bar`` (reloads additionally ``reload`` with a hatched fill); release and
    deadline arrows are ``path`` elements of class ``marker``.
    """
    start, end = window if window is not None else (Fraction(0), trace.end)
    span_ms = max(to_ms(end - start), 1e-9)
    n_rows = len(trace.task_names)
    width = style.margin_left + span_ms * style.px_per_ms + 20
    height = style.margin_top + n_rows * (style.row_height + style.row_gap) + style.margin_bottom

    def x_of(t) -> float:
        return style.margin_left + to_ms(t - start) * style.px_per_ms

    def row_y(i: int) -> float:
        return style.margin_top + i * (style.row_height + style.row_gap)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.2f} {height:.2f}" font-family="sans-serif" font-size="11">',
        "<defs>",
        '<pattern id="reload-hatch" patternUnits="userSpaceOnUse" width="6" height="6" '
        'patternTransform="rotate(45)">',
        '<rect width="6" height="6" fill="#ffffff" />',
        '<line x1="0" y1="0" x2="0" y2="6" stroke="#333333" stroke-width="2" />',
        "</pattern>",
        "</defs>",
        '<g class="labels">',
    ]
    for i, name in enumerate(trace.task_names):
        y = row_y(i) + style.row_height / 2 + 4
        parts.append(f'<text x="6" y="{y:.2f}">{escape(name)}</text>')
    axis_y = row_y(n_rows) + 4
    parts.append(
        f'<line x1="{style.margin_left}" y1="{axis_y:.2f}" x2="{x_of(end):.2f}" '
        f'y2="{axis_y:.2f}" stroke="#000000" />'
    )
    tick = style.tick_ms or _nice_tick(span_ms)
    k = 0
    while k * tick <= span_ms + 1e-9:
        x = style.margin_left + k * tick * style.px_per_ms
        parts.append(f'<text x="{x:.2f}" y="{axis_y + 16:.2f}" text-anchor="middle">{k * tick + to_ms(start):g}</text>')
        k += 1
    parts.append(f'<text x="{x_of(end):.2f}" y="{axis_y + 30:.2f}" text-anchor="end">time (ms)</text>')
    parts.append("</g>")

    parts.append('<g class="segments">')
    for s in trace.busy_segments():
        if s.end <= start or s.start >= end:
            continue
        x0, x1 = x_of(max(s.start, start)), x_of(min(s.end, end))
        y = row_y(s.task_index)
        if s.kind is SegmentKind.RELOAD:
            cls, fill = "bar reload", style.reload_fill
        else:
            cls, fill = "bar execute", style.fills[s.task_index % len(style.fills)]
        title = f"{s.kind.value} {s.model_id} #{s.instance}: {to_ms(s.start):g}-{to_ms(s.end):g} ms"
        parts.append(
            f'<rect class="{cls}" x="{x0:.2f}" y="{y:.2f}" width="{x1 - x0:.2f}" '
            f'height="{style.row_height}" fill="{fill}" stroke="#222222" stroke-width="0.5">'
            f"<title>{escape(title)}</title></rect>"
        )
    parts.append("</g>")

    parts.append('<g class="markers" stroke="#000000" fill="none">')
    for j in trace.jobs:
        y = row_y(j.task_index)
        if style.release_markers and start <= j.release <= end:
            parts.append(_arrow(x_of(j.release), y - 10, y, True, "release"))
        if style.deadline_markers and start <= j.deadline <= end:
            parts.append(_arrow(x_of(j.deadline), y - 10, y, False, "deadline"))
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _nice_tick(span_ms: float) -> float:
    for step in (1, 2, 5, 10, 20, 25, 50, 100, 200, 250, 500, 1000, 2000, 5000):
        if span_ms / step <= 16:
            return step
    return 10000


# -- markdown ---------------------------------------------------------------

def busy_cell(result: SimResult) -> str:
    return f"{float(result.busy_ratio):.3f}" if result.sustainable else FAIL


def summary_md(results: Iterable[tuple[str, str, SimResult]]) -> str:
    """Rows are setups, columns strategies, cells busy ratios or ``Fail``."""
    results = list(results)
    if not results:
        raise ValueError("summary_md needs at least one result")
    setups: list[str] = []
    strategies: list[str] = []
    cells = {}
    for setup, strategy, result in results:
        if setup not in setups:
            setups.append(setup)
        if strategy not in strategies:
            strategies.append(strategy)
        cells[setup, strategy] = busy_cell(result)
    lines = [
        "| setup | " + " | ".join(strategies) + " |",
        "|---|" + "---|" * len(strategies),
    ]
    for setup in setups:
        row = [cells.get((setup, s), "") for s in strategies]
        lines.append(f"| {setup} | " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def ratio_cell(value) -> str:
    return FAIL if value == FAIL else f"{float(value):.3f}"


def sweep_csv(reports: Sequence[SweepReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["workload", "axis", "point", "verdict", "busy_ratio", "exec_ratio",
                     "reload_ratio", "normalized"])
    for rep in reports:
        for label, r in rep.points:
            writer.writerow([
                rep.workload, rep.axis.value, label, r.verdict.value,
                f"{float(r.busy_ratio):.6f}", f"{float(r.exec_ratio):.6f}",
                f"{float(r.reload_ratio):.6f}", ratio_cell(rep.normalized[label]),
            ])
    return buf.getvalue()


def sweep_md(reports: Sequence[SweepReport]) -> str:
    """Normalized busy ratios, one row per workload; the baseline column reads 1.000."""
    if not reports:
        raise ValueError("sweep_md needs at least one report")
    labels: list[str] = []
    for rep in reports:
        for label in rep.labels:
            if label not in labels:
                labels.append(label)
    lines = [
        "| workload | " + " | ".join(labels) + " |",
        "|---|" + "---|" * len(labels),
    ]
    for rep in reports:
        row = [ratio_cell(rep.normalized[l]) if l in rep.normalized else "" for l in labels]
        lines.append(f"| {rep.workload} | " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
