"""Tasks, deployment strategies and workload files."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .timebase import (
    TimeError,
    TimeSpan,
    format_duration,
    format_number,
    hyperperiod,
    parse_duration,
)


class WorkloadError(ValueError):
    """Invalid workload document or value; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class Mode(str, enum.Enum):
    OVERLAY = "overlay"
    CUSTOMIZED = "customized"


@dataclass(frozen=True)
class StrategyConfig:
    mode: Mode
    reload_overhead: TimeSpan = Fraction(0)
    overlay_scale: Fraction = Fraction(1)
    wide_spectrum: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "reload_overhead", Fraction(self.reload_overhead))
        object.__setattr__(self, "overlay_scale", Fraction(self.overlay_scale))
        if self.reload_overhead < 0:
            raise WorkloadError("strategy.reload_overhead", "must be non-negative")
        if self.overlay_scale < 1:
            raise WorkloadError("strategy.overlay_scale", "must be >= 1")
        if self.mode is Mode.OVERLAY and self.reload_overhead != 0:
            raise WorkloadError("strategy.reload_overhead", "overlay mode has no reload overhead")
        if self.mode is Mode.CUSTOMIZED and (self.overlay_scale != 1 or self.wide_spectrum):
            raise WorkloadError("strategy", "overlay_scale/wide_spectrum apply to overlay mode only")

    @classmethod
    def overlay(cls, scale=1, wide_spectrum: bool = False) -> "StrategyConfig":
        return cls(Mode.OVERLAY, overlay_scale=Fraction(scale), wide_spectrum=wide_spectrum)

    @classmethod
    def customized(cls, reload_overhead: TimeSpan) -> "StrategyConfig":
        return cls(Mode.CUSTOMIZED, reload_overhead=Fraction(reload_overhead))

    @property
    def label(self) -> str:
        if self.mode is Mode.CUSTOMIZED:
            return f"customized@{format_duration(self.reload_overhead)}"
        if self.wide_spectrum:
            return "overlay-wide"
        if self.overlay_scale == 1:
            return "overlay"
        return f"overlay-x{format_number(self.overlay_scale)}"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"mode": self.mode.value}
        if self.mode is Mode.CUSTOMIZED:
            out["reload_overhead"] = format_duration(self.reload_overhead)
        else:
            out["overlay_scale"] = format_number(self.overlay_scale)
            out["wide_spectrum"] = self.wide_spectrum
        return out


@dataclass(frozen=True)
class TaskSpec:
    name: str
    model_id: str
    frequency: Fraction
    overlay_exec: TimeSpan
    customized_exec: TimeSpan

    def __post_init__(self):
        for attr in ("frequency", "overlay_exec", "customized_exec"):
            object.__setattr__(self, attr, Fraction(getattr(self, attr)))
        if self.frequency <= 0:
            raise WorkloadError("frequency_hz", f"task {self.name!r}: frequency must be positive")
        if self.overlay_exec <= 0 or self.customized_exec <= 0:
            raise WorkloadError("exec", f"task {self.name!r}: execution times must be positive")

    @property
    def period(self) -> TimeSpan:
        return period_of(self.frequency)


@dataclass(frozen=True)
class WorkloadConfig:
    name: str
    tasks: tuple[TaskSpec, ...]
    strategy: StrategyConfig
    horizon_hyperperiods: int = 20
    warmup_hyperperiods: int = 2

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise WorkloadError("tasks", "workload has no tasks")
        _check_unique([t.name for t in self.tasks], "tasks", "task name")
        _check_unique([t.model_id for t in self.tasks], "tasks", "model_id")
        if self.warmup_hyperperiods < 0:
            raise WorkloadError("warmup_hyperperiods", "must be non-negative")
        if self.horizon_hyperperiods <= self.warmup_hyperperiods:
            raise WorkloadError(
                "horizon_hyperperiods", "must exceed warmup_hyperperiods"
            )

    @property
    def hyperperiod(self) -> TimeSpan:
        return hyperperiod(t.period for t in self.tasks)

    @property
    def horizon(self) -> TimeSpan:
        return self.horizon_hyperperiods * self.hyperperiod

    def with_strategy(self, strategy: StrategyConfig) -> "WorkloadConfig":
        return replace(self, strategy=strategy)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "tasks": [
                {
                    "name": t.name,
                    "model_id": t.model_id,
                    "frequency_hz": format_number(t.frequency),
                    "overlay_exec": format_duration(t.overlay_exec),
                    "customized_exec": format_duration(t.customized_exec),
                }
                for t in self.tasks
            ],
            "strategy": self.strategy.to_dict(),
            "horizon_hyperperiods": self.horizon_hyperperiods,
            "warmup_hyperperiods": self.warmup_hyperperiods,
        }


def _check_unique(values, path, what):
    seen = set()
    for i, v in enumerate(values):
        if v in seen:
            raise WorkloadError(f"{path}[{i}]", f"duplicate {what} {v!r}")
        seen.add(v)


def period_of(frequency) -> TimeSpan:
    frequency = Fraction(frequency)
    if frequency <= 0:
        raise WorkloadError("frequency_hz", f"frequency must be positive, got {frequency}")
    return 1 / frequency


def effective_exec(task: TaskSpec, strategy: StrategyConfig) -> TimeSpan:
    """Execution time of one job of ``task`` under ``strategy``.

    The wide-spectrum overlay runs every model at its customized latency while
    keeping the overlay's zero switch cost.
    """
    if strategy.mode is Mode.CUSTOMIZED or strategy.wide_spectrum:
        return task.customized_exec
    return task.overlay_exec / strategy.overlay_scale


# -- document parsing -------------------------------------------------------

def _require(obj: Mapping, key: str, path: str):
    if key not in obj:
        raise WorkloadError(f"{path}.{key}" if path else key, "missing required field")
    return obj[key]


def _duration(value, path: str, *, allow_zero: bool = False) -> TimeSpan:
    try:
        d = parse_duration(value)
    except TimeError as exc:
        raise WorkloadError(path, str(exc)) from None
    if d < 0 or (d == 0 and not allow_zero):
        raise WorkloadError(path, f"duration must be {'non-negative' if allow_zero else 'positive'}, got {value!r}")
    return d


def _rational(value, path: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise WorkloadError(path, f"expected a number, got {value!r}")
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError):
        raise WorkloadError(path, f"malformed number {value!r}") from None


def _int(obj: Mapping, key: str, default: int) -> int:
    value = obj.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise WorkloadError(key, f"expected an integer, got {value!r}")
    return value


def parse_strategy(obj, path: str = "strategy") -> StrategyConfig:
    if not isinstance(obj, Mapping):
        raise WorkloadError(path, "expected an object")
    mode = _require(obj, "mode", path)
    if mode not in (m.value for m in Mode):
        raise WorkloadError(f"{path}.mode", f"unknown strategy mode {mode!r} (expected 'overlay' or 'customized')")
    if mode == Mode.CUSTOMIZED.value:
        reload = _duration(_require(obj, "reload_overhead", path), f"{path}.reload_overhead", allow_zero=True)
        return StrategyConfig.customized(reload)
    scale = _rational(obj.get("overlay_scale", 1), f"{path}.overlay_scale")
    if scale < 1:
        raise WorkloadError(f"{path}.overlay_scale", "must be >= 1")
    wide = obj.get("wide_spectrum", False)
    if not isinstance(wide, bool):
        raise WorkloadError(f"{path}.wide_spectrum", "expected a boolean")
    return StrategyConfig.overlay(scale, wide_spectrum=wide)


def parse_task(obj, path: str) -> TaskSpec:
    if not isinstance(obj, Mapping):
        raise WorkloadError(path, "expected an object")
    name = _require(obj, "name", path)
    model_id = _require(obj, "model_id", path)
    for key, value in (("name", name), ("model_id", model_id)):
        if not isinstance(value, str) or not value:
            raise WorkloadError(f"{path}.{key}", "expected a non-empty string")
    freq = _rational(_require(obj, "frequency_hz", path), f"{path}.frequency_hz")
    if freq <= 0:
        raise WorkloadError(f"{path}.frequency_hz", f"frequency must be positive, got {freq}")
    return TaskSpec(
        name=name,
        model_id=model_id,
        frequency=freq,
        overlay_exec=_duration(_require(obj, "overlay_exec", path), f"{path}.overlay_exec"),
        customized_exec=_duration(_require(obj, "customized_exec", path), f"{path}.customized_exec"),
    )


def load_workload(text: str) -> WorkloadConfig:
    """Parse and validate a JSON workload document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkloadError("", f"malformed workload document: {exc}") from None
    if not isinstance(doc, Mapping):
        raise WorkloadError("", "malformed workload document: top level must be an object")
    name = _require(doc, "name", "")
    if not isinstance(name, str) or not name:
        raise WorkloadError("name", "expected a non-empty string")
    raw_tasks = _require(doc, "tasks", "")
    if not isinstance(raw_tasks, list):
        raise WorkloadError("tasks", "expected a list")
    tasks = [parse_task(t, f"tasks[{i}]") for i, t in enumerate(raw_tasks)]
    strategy = parse_strategy(_require(doc, "strategy", ""))
    return WorkloadConfig(
        name=name,
        tasks=tuple(tasks),
        strategy=strategy,
        horizon_hyperperiods=_int(doc, "horizon_hyperperiods", 20),
        warmup_hyperperiods=_int(doc, "warmup_hyperperiods", 2),
    )


def dump_workload(workload: WorkloadConfig) -> str:
    return json.dumps(workload.to_dict(), indent=2) + "\n"


# -- latency tables and builtin setups --------------------------------------

LatencyTable = dict[str, tuple[TimeSpan, TimeSpan]]

# Task slots of the autonomous-driving scenario: (task name, family, frequency).
TASK_SLOTS = (
    ("segmentation", "DeiT", 20),
    ("classification", "MLP-Mixer", 15),
    ("pointcloud", "PointNet", 10),
)

SETUPS = {
    "A": ("DeiT-L", "MLP-Mixer-L", "PointNet-L"),
    "B": ("DeiT-S", "MLP-Mixer-L", "PointNet-L"),
    "C": ("DeiT-S", "MLP-Mixer-L", "PointNet-S"),
    "D": ("DeiT-S", "MLP-Mixer-S", "PointNet-S"),
}

SHIPPED_TABLE = "latency_table.json"


def parse_latency_table(text: str) -> LatencyTable:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkloadError("", f"malformed latency table: {exc}") from None
    models = doc.get("models") if isinstance(doc, Mapping) else None
    if not isinstance(models, Mapping):
        raise WorkloadError("models", "latency table needs a 'models' object")
    table = {}
    for model_id, entry in models.items():
        path = f"models.{model_id}"
        if not isinstance(entry, Mapping):
            raise WorkloadError(path, "expected an object")
        table[model_id] = (
            _duration(_require(entry, "overlay_exec", path), f"{path}.overlay_exec"),
            _duration(_require(entry, "customized_exec", path), f"{path}.customized_exec"),
        )
    return table


def dump_latency_table(table: LatencyTable, extra: Mapping | None = None) -> str:
    doc: dict[str, Any] = {
        "models": {
            m: {"overlay_exec": format_duration(o), "customized_exec": format_duration(c)}
            for m, (o, c) in table.items()
        }
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2) + "\n"


def shipped_latency_table() -> LatencyTable:
    text = resources.files("reloadsim").joinpath("data").joinpath(SHIPPED_TABLE).read_text()
    return parse_latency_table(text)


def load_latency_table(path: str | Path | None = None) -> LatencyTable:
    if path is None:
        return shipped_latency_table()
    return parse_latency_table(Path(path).read_text())


def builtin_setup(
    setup_id: str,
    strategy: StrategyConfig,
    table: LatencyTable | None = None,
    horizon_hyperperiods: int = 20,
    warmup_hyperperiods: int = 2,
) -> WorkloadConfig:
    """One of the four experiment setups A-D with latencies from ``table``."""
    if setup_id not in SETUPS:
        raise WorkloadError("setup", f"unknown setup {setup_id!r} (expected one of A, B, C, D)")
    table = shipped_latency_table() if table is None else table
    tasks = []
    for (name, _family, freq), model_id in zip(TASK_SLOTS, SETUPS[setup_id]):
        if model_id not in table:
            raise WorkloadError(f"models.{model_id}", "missing from latency table")
        overlay, customized = table[model_id]
        tasks.append(TaskSpec(name, model_id, Fraction(freq), overlay, customized))
    return WorkloadConfig(
        name=f"setup-{setup_id}",
        tasks=tuple(tasks),
        strategy=strategy,
        horizon_hyperperiods=horizon_hyperperiods,
        warmup_hyperperiods=warmup_hyperperiods,
    )
