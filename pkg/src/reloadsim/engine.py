"""Non-preemptive EDF on a single accelerator with bitstream reloads."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .timebase import TimeSpan, TimeStamp, checked
from .workload import Mode, StrategyConfig, WorkloadConfig, effective_exec


class SimulationError(RuntimeError):
    pass


class SegmentKind(str, enum.Enum):
    IDLE = "idle"
    RELOAD = "reload"
    EXECUTE = "execute"


@dataclass(frozen=True)
class Job:
    task_index: int
    instance: int
    release: TimeStamp
    deadline: TimeStamp
    exec_demand: TimeSpan
    model_id: str

    @property
    def priority(self):
        return (self.deadline, self.release, self.task_index, self.instance)


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    start: TimeStamp
    end: TimeStamp
    task_index: Optional[int] = None
    instance: Optional[int] = None
    model_id: Optional[str] = None

    @property
    def length(self) -> TimeSpan:
        return self.end - self.start


@dataclass(frozen=True)
class Trace:
    """Contiguous timeline covering ``[0, end]`` with ``end >= horizon``."""

    segments: tuple[Segment, ...]
    horizon: TimeStamp
    task_names: tuple[str, ...]
    jobs: tuple[Job, ...] = ()

    @property
    def end(self) -> TimeStamp:
        return self.segments[-1].end if self.segments else self.horizon

    def busy_segments(self) -> list[Segment]:
        return [s for s in self.segments if s.kind is not SegmentKind.IDLE]

    def completions(self) -> dict[tuple[int, int], TimeStamp]:
        return {
            (s.task_index, s.instance): s.end
            for s in self.segments
            if s.kind is SegmentKind.EXECUTE
        }


def switch_cost(previous_model: Optional[str], next_model: str, strategy: StrategyConfig) -> TimeSpan:
    """Reload time charged before running ``next_model``.

    ``previous_model`` is None at cold start, when no bitstream is loaded.
    """
    if strategy.mode is Mode.OVERLAY:
        return Fraction(0)
    if previous_model == next_model:
        return Fraction(0)
    return strategy.reload_overhead


def dispatch_next(pending: Iterable[Job], now: TimeStamp) -> Job:
    """Earliest absolute deadline; ties by release, task index, instance."""
    return min(pending, key=lambda j: j.priority)


def release_jobs(workload: WorkloadConfig) -> list[Job]:
    """All jobs with release strictly before the horizon, in release order."""
    horizon = workload.horizon
    jobs = []
    for i, task in enumerate(workload.tasks):
        period = task.period
        demand = effective_exec(task, workload.strategy)
        k = 0
        while k * period < horizon:
            jobs.append(Job(i, k, k * period, (k + 1) * period, demand, task.model_id))
            k += 1
    jobs.sort(key=lambda j: (j.release, j.task_index, j.instance))
    return jobs


def run_schedule(workload: WorkloadConfig) -> Trace:
    """Event-driven run; returns the full trace.

    Dispatch decisions happen only before the horizon, but a job started
    before it runs to completion, so the trace may end after the horizon.
    """
    strategy = workload.strategy
    horizon = checked(workload.horizon)
    jobs = release_jobs(workload)
    segments: list[Segment] = []
    ready: list[tuple] = []
    now = Fraction(0)
    loaded: Optional[str] = None
    nxt = 0

    while now < horizon:
        while nxt < len(jobs) and jobs[nxt].release <= now:
            heapq.heappush(ready, (jobs[nxt].priority, jobs[nxt]))
            nxt += 1
        if not ready:
            until = jobs[nxt].release if nxt < len(jobs) else horizon
            segments.append(Segment(SegmentKind.IDLE, now, until))
            now = until
            continue
        _, job = heapq.heappop(ready)
        cost = switch_cost(loaded, job.model_id, strategy)
        if cost > 0:
            end = checked(now + cost)
            segments.append(
                Segment(SegmentKind.RELOAD, now, end, job.task_index, job.instance, job.model_id)
            )
            now = end
        end = checked(now + job.exec_demand)
        segments.append(
            Segment(SegmentKind.EXECUTE, now, end, job.task_index, job.instance, job.model_id)
        )
        now = end
        loaded = job.model_id

    return Trace(
        segments=tuple(segments),
        horizon=horizon,
        task_names=tuple(t.name for t in workload.tasks),
        jobs=tuple(jobs),
    )


def simulate(workload: WorkloadConfig):
    """Run ``workload`` and evaluate it; returns a :class:`metrics.SimResult`."""
    from .metrics import evaluate

    return evaluate(run_schedule(workload), workload)
