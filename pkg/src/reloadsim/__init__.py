"""Overlay vs customized accelerator deployment: non-preemptive EDF simulation
with bitstream-reload overheads, busy-ratio metrics and sensitivity sweeps."""

from .analysis import UtilizationBounds, quick_verdict, utilization_bounds
from .calibration import CalibrationProblem, Target, calibrate_workload
from .engine import Segment, SegmentKind, Trace, dispatch_next, simulate, switch_cost
from .metrics import SimResult, Verdict, busy_ratio, classify_sustainability, response_stats
from .report import gantt_svg, summary_md, trace_csv
from .sweep import FAIL, WIDE, SweepReport, normalize_report, sweep_overlay, sweep_reload
from .timebase import hyperperiod, parse_duration, rational
from .workload import (
    Mode,
    StrategyConfig,
    TaskSpec,
    WorkloadConfig,
    builtin_setup,
    effective_exec,
    load_workload,
    period_of,
)

__version__ = "0.1.0"
