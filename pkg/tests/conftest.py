import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reloadsim.workload import StrategyConfig, TaskSpec, WorkloadConfig  # noqa: E402

MS = Fraction(1, 1000)

# filled by test_acceptance, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def single_task(period_ms=100, exec_ms=40, strategy=None, horizon=10, warmup=2):
    task = TaskSpec("t0", "m0", Fraction(1000, period_ms), exec_ms * MS, exec_ms * MS)
    return WorkloadConfig(
        "single", (task,), strategy or StrategyConfig.overlay(), horizon, warmup
    )


@pytest.fixture
def example_table():
    """Setup A latencies worked out by hand: overlay (12, 10, 13) ms with
    customized speedups 20%, 40%, 5%."""
    return {
        "DeiT-L": (12 * MS, 10 * MS),
        "MLP-Mixer-L": (10 * MS, Fraction(50, 7) * MS),
        "PointNet-L": (13 * MS, Fraction(260, 21) * MS),
    }
