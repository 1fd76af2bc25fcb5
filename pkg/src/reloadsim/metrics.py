"""Busy ratio, response times, backlog and the sustainability verdict."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .engine import SegmentKind, Trace
from .timebase import TimeSpan, TimeStamp
from .workload import WorkloadConfig

DEFAULT_WINDOW = 5


class Verdict(str, enum.Enum):
    SUSTAINABLE = "Sustainable"
    DIVERGENT = "Divergent"


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ResponseStats:
    completed: int
    max_response: TimeSpan
    mean_response: TimeSpan
    miss_count: int
    trend_slope: Fraction  # seconds of response growth per instance


@dataclass(frozen=True)
class SimResult:
    trace: Trace
    window: tuple[TimeStamp, TimeStamp]
    busy_ratio: Fraction
    exec_ratio: Fraction
    reload_ratio: Fraction
    per_task: tuple[Optional[ResponseStats], ...]
    backlog_series: tuple[tuple[TimeStamp, TimeSpan], ...]
    verdict: Verdict

    @property
    def sustainable(self) -> bool:
        return self.verdict is Verdict.SUSTAINABLE


def _time_in(trace: Trace, kind: SegmentKind, start, end) -> Fraction:
    total = Fraction(0)
    for s in trace.segments:
        if s.kind is kind and s.end > start and s.start < end:
            total += min(s.end, end) - max(s.start, start)
    return total


def _check_window(start, end):
    if not start < end:
        raise MetricsError(f"empty measurement window [{start}, {end}]")


def busy_ratio(trace: Trace, window: tuple[TimeStamp, TimeStamp]) -> Fraction:
    """Share of ``window`` spent executing or reloading."""
    start, end = window
    _check_window(start, end)
    busy = _time_in(trace, SegmentKind.EXECUTE, start, end) + _time_in(
        trace, SegmentKind.RELOAD, start, end
    )
    return busy / (end - start)


def _slope(xs: Sequence[int], ys: Sequence[Fraction]) -> Fraction:
    n = len(xs)
    if n < 2:
        return Fraction(0)
    mx = Fraction(sum(xs), n)
    my = sum(ys, Fraction(0)) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        return Fraction(0)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


def response_stats(
    trace: Trace, window: Optional[tuple[TimeStamp, TimeStamp]] = None
) -> tuple[Optional[ResponseStats], ...]:
    """Per-task response statistics over jobs released inside ``window``.

    Tasks with no completed job in the window get ``None``. A job counts as a
    miss if it completed after its deadline, or is still unfinished although
    its deadline lies within the trace.
    """
    done = trace.completions()
    out = []
    for i in range(len(trace.task_names)):
        jobs = [
            j for j in trace.jobs
            if j.task_index == i and (window is None or window[0] <= j.release < window[1])
        ]
        xs, ys, misses = [], [], 0
        for j in jobs:
            finish = done.get((i, j.instance))
            if finish is None:
                if j.deadline <= trace.end:
                    misses += 1
                continue
            if finish > j.deadline:
                misses += 1
            xs.append(j.instance)
            ys.append(finish - j.release)
        if not ys:
            out.append(None)
            continue
        out.append(
            ResponseStats(
                completed=len(ys),
                max_response=max(ys),
                mean_response=sum(ys, Fraction(0)) / len(ys),
                miss_count=misses,
                trend_slope=_slope(xs, ys),
            )
        )
    return tuple(out)


def backlog_at(trace: Trace, t: TimeStamp) -> TimeSpan:
    """Remaining execution demand just before ``t``.

    Counts jobs released strictly before ``t`` (pending or in flight); reload
    time still owed is excluded.
    """
    released = sum((j.exec_demand for j in trace.jobs if j.release < t), Fraction(0))
    return released - _time_in(trace, SegmentKind.EXECUTE, Fraction(0), t)


def backlog_series(trace: Trace, boundaries: Sequence[TimeStamp]) -> list[tuple[TimeStamp, TimeSpan]]:
    return [(t, backlog_at(trace, t)) for t in boundaries]


def classify_sustainability(series: Sequence, window: int = DEFAULT_WINDOW) -> Verdict:
    """Divergent iff the last ``window`` steps all grow and the end exceeds the start.

    ``series`` holds post-warmup backlogs (bare values or ``(time, value)``
    pairs) sampled at hyperperiod boundaries.
    """
    values = [v[1] if isinstance(v, tuple) else v for v in series]
    if len(values) < window + 1:
        raise MetricsError(
            f"need at least {window + 1} post-warmup backlog samples, got {len(values)}; "
            "use a longer horizon"
        )
    tail = values[-(window + 1):]
    growing = all(a < b for a, b in zip(tail, tail[1:]))
    if growing and values[-1] > values[0]:
        return Verdict.DIVERGENT
    return Verdict.SUSTAINABLE


def evaluate(trace: Trace, workload: WorkloadConfig, window: int = DEFAULT_WINDOW) -> SimResult:
    hp = workload.hyperperiod
    start = workload.warmup_hyperperiods * hp
    end = workload.horizon
    boundaries = [k * hp for k in range(workload.warmup_hyperperiods, workload.horizon_hyperperiods + 1)]
    series = backlog_series(trace, boundaries)
    exec_ratio = _time_in(trace, SegmentKind.EXECUTE, start, end) / (end - start)
    reload_ratio = _time_in(trace, SegmentKind.RELOAD, start, end) / (end - start)
    return SimResult(
        trace=trace,
        window=(start, end),
        busy_ratio=exec_ratio + reload_ratio,
        exec_ratio=exec_ratio,
        reload_ratio=reload_ratio,
        per_task=response_stats(trace, (start, end)),
        backlog_series=tuple(series),
        verdict=classify_sustainability(series, window),
    )
