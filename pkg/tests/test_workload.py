import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from reloadsim.workload import (
    Mode,
    SETUPS,
    StrategyConfig,
    TaskSpec,
    WorkloadConfig,
    WorkloadError,
    builtin_setup,
    dump_latency_table,
    dump_workload,
    effective_exec,
    load_latency_table,
    load_workload,
    parse_latency_table,
    period_of,
    shipped_latency_table,
)

MS = Fraction(1, 1000)


def doc(**overrides):
    base = {
        "name": "setup-A",
        "tasks": [
            {"name": "segmentation", "model_id": "DeiT-L", "frequency_hz": 20,
             "overlay_exec": "12ms", "customized_exec": "10ms"},
            {"name": "classification", "model_id": "MLP-Mixer-L", "frequency_hz": 15,
             "overlay_exec": "10ms", "customized_exec": "50/7ms"},
            {"name": "pointcloud", "model_id": "PointNet-L", "frequency_hz": 10,
             "overlay_exec": "13ms", "customized_exec": "260/21ms"},
        ],
        "strategy": {"mode": "customized", "reload_overhead": "20ms"},
    }
    base.update(overrides)
    return base


@pytest.mark.parametrize("freq, period", [(20, Fraction(1, 20)), (15, Fraction(1, 15)),
                                          (10, Fraction(1, 10)), (Fraction(5, 2), Fraction(2, 5))])
def test_period_of(freq, period):
    assert period_of(freq) == period


@pytest.mark.parametrize("freq", [0, -1])
def test_period_of_rejects(freq):
    with pytest.raises(WorkloadError):
        period_of(freq)


def test_effective_exec_examples():
    t = TaskSpec("seg", "DeiT-L", Fraction(20), 12 * MS, 10 * MS)
    assert effective_exec(t, StrategyConfig.overlay()) == 12 * MS
    assert effective_exec(t, StrategyConfig.overlay(2)) == 6 * MS
    assert effective_exec(t, StrategyConfig.customized(20 * MS)) == 10 * MS
    assert effective_exec(t, StrategyConfig.overlay(wide_spectrum=True)) == 10 * MS


scale_st = st.fractions(min_value=1, max_value=8, max_denominator=100)


@given(scale_st, scale_st)
def test_effective_exec_non_increasing_in_scale(a, b):
    t = TaskSpec("x", "m", Fraction(10), 7 * MS, 3 * MS)
    lo, hi = sorted((a, b))
    assert effective_exec(t, StrategyConfig.overlay(hi)) <= effective_exec(t, StrategyConfig.overlay(lo))


@given(scale_st, st.sampled_from([0, 1, 20]))
def test_wide_spectrum_matches_customized(scale, reload_ms):
    t = TaskSpec("x", "m", Fraction(10), 7 * MS, 3 * MS)
    wide = StrategyConfig.overlay(scale, wide_spectrum=True)
    assert effective_exec(t, wide) == effective_exec(t, StrategyConfig.customized(reload_ms * MS))


def test_strategy_labels():
    assert StrategyConfig.customized(20 * MS).label == "customized@20ms"
    assert StrategyConfig.overlay().label == "overlay"
    assert StrategyConfig.overlay(2).label == "overlay-x2"
    assert StrategyConfig.overlay(wide_spectrum=True).label == "overlay-wide"


def test_strategy_validation():
    with pytest.raises(WorkloadError):
        StrategyConfig.customized(-MS)
    with pytest.raises(WorkloadError):
        StrategyConfig.overlay(Fraction(1, 2))


def test_load_setup_a():
    w = load_workload(json.dumps(doc()))
    assert w.name == "setup-A"
    assert [t.period for t in w.tasks] == [Fraction(1, 20), Fraction(1, 15), Fraction(1, 10)]
    assert w.tasks[1].customized_exec == Fraction(50, 7) * MS
    assert w.strategy.mode is Mode.CUSTOMIZED
    assert w.strategy.reload_overhead == 20 * MS
    assert w.hyperperiod == Fraction(1, 5)
    assert (w.horizon_hyperperiods, w.warmup_hyperperiods) == (20, 2)
    assert w.horizon == 4


def _error(d):
    with pytest.raises(WorkloadError) as info:
        load_workload(json.dumps(d) if not isinstance(d, str) else d)
    return info.value


def test_duplicate_task_name():
    d = doc()
    d["tasks"][1]["name"] = "segmentation"
    err = _error(d)
    assert err.path == "tasks[1]"
    assert "duplicate" in str(err)


def test_negative_reload():
    err = _error(doc(strategy={"mode": "customized", "reload_overhead": "-1ms"}))
    assert err.path == "strategy.reload_overhead"
    assert "non-negative" in str(err)


def test_unknown_mode():
    err = _error(doc(strategy={"mode": "hybrid"}))
    assert err.path == "strategy.mode"
    assert "hybrid" in str(err)


def test_diagnostics_are_distinct():
    d = doc()
    d["tasks"][1]["name"] = "segmentation"
    messages = {
        str(_error(d)),
        str(_error(doc(strategy={"mode": "customized", "reload_overhead": "-1ms"}))),
        str(_error(doc(strategy={"mode": "hybrid"}))),
        str(_error("{not json")),
    }
    assert len(messages) == 4


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["tasks"][0].update(frequency_hz=0), "tasks[0].frequency_hz"),
    (lambda d: d["tasks"][0].update(overlay_exec="0ms"), "tasks[0].overlay_exec"),
    (lambda d: d["tasks"][0].update(customized_exec="12"), "tasks[0].customized_exec"),
    (lambda d: d["tasks"][2].pop("model_id"), "tasks[2].model_id"),
    (lambda d: d.update(tasks=[]), "tasks"),
    (lambda d: d.update(horizon_hyperperiods=2, warmup_hyperperiods=2), None),
    (lambda d: d.update(strategy={"mode": "customized"}), "strategy.reload_overhead"),
    (lambda d: d.update(strategy={"mode": "overlay", "overlay_scale": 0.5}), "strategy.overlay_scale"),
])
def test_invalid_documents(mutate, path):
    d = doc()
    mutate(d)
    err = _error(d)
    if path is not None:
        assert err.path == path


def test_malformed_json():
    assert "malformed" in str(_error("{not json"))
    assert "malformed" in str(_error("[1, 2]"))


name_st = st.text("abcdefgh-", min_size=1, max_size=6)
dur_st = st.fractions(min_value=Fraction(1, 10**4), max_value=1, max_denominator=10**4)
task_st = st.tuples(st.integers(1, 100), dur_st, dur_st)
strategy_st = st.one_of(
    st.builds(StrategyConfig.customized, st.fractions(min_value=0, max_value=1, max_denominator=1000)),
    st.builds(StrategyConfig.overlay, st.fractions(min_value=1, max_value=4, max_denominator=8), st.booleans()),
)


@given(name_st, st.lists(task_st, min_size=1, max_size=4), strategy_st, st.integers(0, 5), st.integers(1, 10))
def test_dump_load_round_trip(name, raw, strategy, warmup, extra):
    tasks = tuple(TaskSpec(f"t{i}", f"m{i}", Fraction(f), o, c) for i, (f, o, c) in enumerate(raw))
    w = WorkloadConfig(name, tasks, strategy, warmup + extra, warmup)
    assert load_workload(dump_workload(w)) == w


def test_builtin_setups_table():
    expected = {
        "A": ["DeiT-L", "MLP-Mixer-L", "PointNet-L"],
        "B": ["DeiT-S", "MLP-Mixer-L", "PointNet-L"],
        "C": ["DeiT-S", "MLP-Mixer-L", "PointNet-S"],
        "D": ["DeiT-S", "MLP-Mixer-S", "PointNet-S"],
    }
    table = shipped_latency_table()
    for sid, models in expected.items():
        w = builtin_setup(sid, StrategyConfig.overlay())
        assert w.name == f"setup-{sid}"
        assert [t.model_id for t in w.tasks] == models
        assert [t.frequency for t in w.tasks] == [20, 15, 10]
        for t in w.tasks:
            assert (t.overlay_exec, t.customized_exec) == table[t.model_id]
    assert set(SETUPS) == set(expected)


def test_builtin_setup_errors():
    with pytest.raises(WorkloadError):
        builtin_setup("E", StrategyConfig.overlay())
    with pytest.raises(WorkloadError):
        builtin_setup("A", StrategyConfig.overlay(), table={"DeiT-L": (MS, MS)})


def test_latency_table_round_trip(tmp_path):
    table = shipped_latency_table()
    assert parse_latency_table(dump_latency_table(table)) == table
    path = tmp_path / "t.json"
    path.write_text(dump_latency_table(table, {"note": "copy"}))
    assert load_latency_table(path) == table
    assert load_latency_table() == table


def test_shipped_table_is_physical():
    table = shipped_latency_table()
    assert len(table) == 6
    for model, (overlay, customized) in table.items():
        assert 0 < customized <= overlay, model
