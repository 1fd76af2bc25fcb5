"""Utilization bounds that bracket the simulator, plus a conservative verdict."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .workload import Mode, WorkloadConfig, effective_exec


class QuickVerdict(str, enum.Enum):
    DEFINITE_OVERLOAD = "DefiniteOverload"
    LIKELY_FEASIBLE = "LikelyFeasible"
    NEEDS_SIMULATION = "NeedsSimulation"


@dataclass(frozen=True)
class UtilizationBounds:
    lower: Fraction          # sum f_i * C_i, no reloads
    upper: Fraction          # sum f_i * (C_i + R), a reload before every job
    blocking: Fraction = Fraction(0)  # max_i f_i * max_j (C_j + R)

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower utilization bound exceeds upper bound")

    @property
    def verdict(self) -> QuickVerdict:
        return quick_verdict(self)


def utilization_bounds(workload: WorkloadConfig) -> UtilizationBounds:
    strategy = workload.strategy
    reload = strategy.reload_overhead if strategy.mode is Mode.CUSTOMIZED else Fraction(0)
    demands = [effective_exec(t, strategy) for t in workload.tasks]
    lower = sum((t.frequency * c for t, c in zip(workload.tasks, demands)), Fraction(0))
    upper = sum((t.frequency * (c + reload) for t, c in zip(workload.tasks, demands)), Fraction(0))
    longest = max(demands) + reload
    blocking = max(t.frequency for t in workload.tasks) * longest
    return UtilizationBounds(lower, upper, blocking)


def quick_verdict(bounds: UtilizationBounds) -> QuickVerdict:
    """Three-valued shortcut; anything not clear-cut is left to simulation.

    Uses the sufficient non-preemptive EDF test: full pessimistic utilization
    plus the worst blocking share of the shortest period must fit in 1.
    """
    if bounds.lower > 1:
        return QuickVerdict.DEFINITE_OVERLOAD
    if bounds.upper <= 1 - bounds.blocking:
        return QuickVerdict.LIKELY_FEASIBLE
    return QuickVerdict.NEEDS_SIMULATION
