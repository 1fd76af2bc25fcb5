"""Reload-overhead and overlay-throughput sensitivity sweeps."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .engine import simulate
from .metrics import SimResult
from .timebase import TimeSpan, format_duration, format_number
from .workload import Mode, StrategyConfig, WorkloadConfig

FAIL = "Fail"
WIDE = "wide"

OVERLAY_KEY = "overlay"


class SweepError(ValueError):
    pass


class Axis(str, enum.Enum):
    RELOAD_OVERHEAD = "ReloadOverhead"
    OVERLAY_SCALE = "OverlayScale"


@dataclass(frozen=True)
class SweepReport:
    axis: Axis
    workload: str
    points: tuple[tuple[str, SimResult], ...]
    baseline_key: str
    normalized: dict  # label -> Fraction or FAIL

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.points]

    def result(self, label: str) -> SimResult:
        return dict(self.points)[label]


def normalize_report(points: Sequence[tuple[str, SimResult]], baseline_key: str) -> dict:
    """Busy ratio of each sustainable point over the baseline's; divergent points get FAIL."""
    by_label = dict(points)
    if baseline_key not in by_label:
        raise SweepError(f"baseline {baseline_key!r} missing from sweep points")
    base = by_label[baseline_key]
    if not base.sustainable:
        raise SweepError(f"baseline {baseline_key!r} is Divergent; cannot normalize")
    if base.busy_ratio == 0:
        raise SweepError(f"baseline {baseline_key!r} has zero busy ratio")
    return {
        label: (r.busy_ratio / base.busy_ratio if r.sustainable else FAIL)
        for label, r in points
    }


def _run_grid(grid: Sequence[tuple[str, WorkloadConfig]], workers: Optional[int]):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(simulate, [w for _, w in grid]))
    else:
        results = [simulate(w) for _, w in grid]
    return tuple((label, r) for (label, _), r in zip(grid, results))


def reload_label(overhead: TimeSpan) -> str:
    return f"cust@{format_duration(overhead)}"


def sweep_reload(
    base: WorkloadConfig, overheads: Sequence[TimeSpan], workers: Optional[int] = None
) -> SweepReport:
    """Customized run per overhead, normalized to the plain overlay run."""
    if base.strategy.mode is not Mode.CUSTOMIZED:
        raise SweepError("sweep_reload needs a workload with a customized strategy")
    overheads = [Fraction(o) for o in overheads]
    if any(o < 0 for o in overheads):
        raise SweepError("reload overheads must be non-negative")
    grid = [(OVERLAY_KEY, base.with_strategy(StrategyConfig.overlay()))]
    grid += [(reload_label(o), base.with_strategy(StrategyConfig.customized(o))) for o in overheads]
    labels = [label for label, _ in grid]
    if len(set(labels)) != len(labels):
        raise SweepError("duplicate overheads in sweep")
    points = _run_grid(grid, workers)
    return SweepReport(Axis.RELOAD_OVERHEAD, base.name, points, OVERLAY_KEY,
                       normalize_report(points, OVERLAY_KEY))


def scale_label(scale: Union[Fraction, str]) -> str:
    return "overlay-wide" if scale == WIDE else f"overlay-x{format_number(Fraction(scale))}"


def sweep_overlay(
    base: WorkloadConfig,
    scales: Sequence[Union[Fraction, str]],
    baseline_reload: TimeSpan,
    workers: Optional[int] = None,
) -> SweepReport:
    """Overlay run per throughput scale (or WIDE), normalized to customized@baseline_reload."""
    baseline_reload = Fraction(baseline_reload)
    if baseline_reload < 0:
        raise SweepError("baseline reload overhead must be non-negative")
    key = reload_label(baseline_reload)
    grid = [(key, base.with_strategy(StrategyConfig.customized(baseline_reload)))]
    for s in scales:
        if s == WIDE:
            strategy = StrategyConfig.overlay(wide_spectrum=True)
        else:
            if Fraction(s) < 1:
                raise SweepError(f"overlay scale {s} must be >= 1")
            strategy = StrategyConfig.overlay(Fraction(s))
        grid.append((scale_label(s), base.with_strategy(strategy)))
    labels = [label for label, _ in grid]
    if len(set(labels)) != len(labels):
        raise SweepError("duplicate scales in sweep")
    points = _run_grid(grid, workers)
    return SweepReport(Axis.OVERLAY_SCALE, base.name, points, key, normalize_report(points, key))
