"""Matplotlib bar charts written next to the CSV/markdown reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import SimResult  # noqa: E402
from .sweep import FAIL, SweepReport  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "axes.grid.axis": "y",
    "grid.alpha": 0.3,
    "svg.hashsalt": "reloadsim",
    "savefig.bbox": "tight",
}
FAIL_HEIGHT = 1.05


def _save(fig, path: Path):
    path = Path(path)
    meta = {"Date": None} if path.suffix in (".svg", ".pdf") else None
    fig.savefig(path, metadata=meta, dpi=150)
    plt.close(fig)
    return path


def _bars(ax, groups, series, values, ylabel):
    """Grouped bars; ``values[g][s]`` is a float or FAIL."""
    width = 0.8 / max(len(series), 1)
    x = np.arange(len(groups))
    for k, name in enumerate(series):
        heights, fails = [], []
        for g in groups:
            v = values[g].get(name)
            fails.append(v == FAIL)
            heights.append(FAIL_HEIGHT if v == FAIL else (0.0 if v is None else float(v)))
        pos = x + (k - (len(series) - 1) / 2) * width
        bars = ax.bar(pos, heights, width, label=name)
        for bar, failed in zip(bars, fails):
            if failed:
                bar.set_hatch("//")
                bar.set_facecolor("white")
                bar.set_edgecolor("#c44e52")
                ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(), FAIL,
                        ha="center", va="bottom", fontsize=8, color="#c44e52")
    ax.set_xticks(x)
    ax.set_xticklabels(groups)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8, frameon=False, ncol=min(len(series), 3))


def plot_busy_summary(results: Sequence[tuple[str, str, SimResult]], path) -> Path:
    """Busy ratio per setup and strategy; divergent runs drawn as hatched Fail bars."""
    groups, series, values = [], [], {}
    for setup, strategy, r in results:
        if setup not in groups:
            groups.append(setup)
        if strategy not in series:
            series.append(strategy)
        values.setdefault(setup, {})[strategy] = r.busy_ratio if r.sustainable else FAIL
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.2))
        _bars(ax, groups, series, values, "accelerator busy ratio")
        ax.set_ylim(0, 1.2)
        return _save(fig, path)


def plot_sweep(reports: Sequence[SweepReport], path) -> Path:
    groups = [rep.workload for rep in reports]
    series: list[str] = []
    for rep in reports:
        series += [label for label in rep.labels if label not in series]
    values = {rep.workload: dict(rep.normalized) for rep in reports}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 3.4))
        _bars(ax, groups, series, values, f"busy ratio / {reports[0].baseline_key}")
        ax.axhline(1.0, color="black", linewidth=0.8, linestyle="--")
        return _save(fig, path)
