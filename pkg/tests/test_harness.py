import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmdist.errors import ConfigError
from swarmdist.harness import (
    ExperimentConfig,
    dynamic_swarm_event,
    generate_requests,
    load_config,
    min_uav_search,
    recovery_analysis,
    run_experiment,
)
from swarmdist.harness.cli import main
from swarmdist.harness.runner import LATENCY_COLUMNS, TRACE_COLUMNS, read_latency_totals, read_trace_totals

SMALL = dict(total_steps=1024, frames=3, train={"batch_size": 256, "n_envs": 8})


# -- configuration -----------------------------------------------------------


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(seed=3, qos_factor=1.0, **SMALL)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path).to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "doc",
    [
        {"colour": "red"},
        {"train": {"learning_rte": 1e-3}},
        {"grid": {"sides": 4}},
        {"schema_version": 2},
        {"mode": "static"},
        {"budget_scope": "week"},
        {"request_rate": 0},
        {"network": "ResNet"},
    ],
)
def test_config_rejections(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_config_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_uav_override_drops_explicit_roster():
    cfg = ExperimentConfig(swarm=[{"speed": 1e8, "memory": 1e9, "compute": 1e12}] * 4)
    assert len(cfg.roster()) == 4
    assert len(cfg.with_overrides(n_uavs=6).roster()) == 6
    assert cfg.with_overrides(seed=None).swarm == cfg.swarm


# -- requests ----------------------------------------------------------------


def test_poisson_mean():
    sched = generate_requests(5.0, 1000, seed=0, n_uavs=5)
    assert np.mean(sched.counts) == pytest.approx(5.0, rel=0.05)
    assert len(sched.requests) == sum(sched.counts)
    assert {r.source for r in sched.requests} == set(range(5))


def test_tiny_rate_and_zero_frames():
    sched = generate_requests(1e-9, 50, seed=1)
    assert sum(sched.counts) == 0 and sched.requests == ()
    assert generate_requests(5.0, 0, seed=1).requests == ()


def test_request_generation_errors():
    with pytest.raises(ConfigError):
        generate_requests(0.0, 10, 0)
    with pytest.raises(ConfigError):
        generate_requests(1.0, 10, 0, n_uavs=0)


@settings(max_examples=30, deadline=None)
@given(rate=st.floats(0.1, 20), frames=st.integers(0, 40), seed=st.integers(0, 2**31))
def test_request_schedule_invariants(rate, frames, seed):
    a = generate_requests(rate, frames, seed, n_uavs=3)
    assert a == generate_requests(rate, frames, seed, n_uavs=3)
    assert len(a.counts) == frames
    assert [r.request_id for r in a.requests] == list(range(len(a.requests)))
    grouped = [(f, len(reqs)) for f, reqs in a.by_frame()]
    assert [c for _, c in grouped] == list(a.counts)
    assert all(r.frame == f for f, reqs in a.by_frame() for r in reqs)


# -- runs and artifacts ------------------------------------------------------


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    cfg = ExperimentConfig(seed=4, **SMALL)
    out = []
    for name in ("a", "b"):
        d = tmp_path_factory.mktemp(name)
        out.append((run_experiment(cfg, d), d))
    return out


def test_runs_are_byte_identical(two_runs):
    (_, a), (_, b) = two_runs
    for name in ("trace.csv", "rewards.csv", "latency.csv", "policy.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_artifact_files(two_runs):
    report, d = two_runs[0]
    header = (d / "trace.csv").read_text().splitlines()[0].split(",")
    assert tuple(header) == TRACE_COLUMNS
    assert tuple((d / "latency.csv").read_text().splitlines()[0].split(",")) == LATENCY_COLUMNS
    schema = json.loads((d / "schema.json").read_text())
    assert set(schema["trace.csv"]) == set(TRACE_COLUMNS)
    doc = json.loads((d / "report.json").read_text())
    assert doc["metrics"]["requests"] == len(report.outcomes)
    assert doc["config"]["seed"] == 4


def test_trace_totals_match_report(two_runs):
    report, d = two_runs[0]
    summary = report.summary()
    trace = read_trace_totals(d / "trace.csv")
    assert trace["total_reward"] == pytest.approx(summary["total_reward"], abs=1e-9)
    assert trace["total_penalty"] == pytest.approx(summary["total_penalty"], abs=1e-9)
    assert trace["accuracy"] == pytest.approx(summary["accuracy"], abs=1e-12)
    lat = read_latency_totals(d / "latency.csv")
    assert lat["total_latency"] == pytest.approx(summary["total_latency"], abs=1e-9)
    assert lat["shared_bytes"] == summary["shared_bytes"]
    assert lat["complete_requests"] == summary["complete_requests"]


def test_eval_from_checkpoint_reproduces_replay(two_runs, tmp_path):
    report, d = two_runs[0]
    cfg = ExperimentConfig(seed=4, **SMALL)
    again = run_experiment(cfg, tmp_path, checkpoint=d / "policy.json")
    assert (tmp_path / "trace.csv").read_bytes() == (d / "trace.csv").read_bytes()
    assert again.summary()["total_reward"] == report.summary()["total_reward"]


def test_frame_budgets_are_never_overdrawn():
    cfg = ExperimentConfig(seed=2, budget_scope="frame", **SMALL)
    report = run_experiment(cfg, write=False)
    for o in report.outcomes:
        if o.latency is not None:
            assert o.violations == []


# -- CLI ---------------------------------------------------------------------


def test_cli_train(tmp_path, capsys):
    code = main(["train", "--steps", "512", "--out", str(tmp_path), "--uavs", "3"])
    assert code == 0
    assert (tmp_path / "trace.csv").exists()
    assert "mean_latency" in capsys.readouterr().out


def test_cli_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 1}))
    assert main(["train", "--config", str(bad)]) == 2


def test_cli_infeasible(tmp_path):
    assert main(["train", "--uavs", "26", "--out", str(tmp_path)]) == 3


def test_cli_baseline(tmp_path):
    assert main(["baseline", "--uavs", "3", "--trials", "5", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "baselines.csv").read_text().splitlines()
    assert len(rows) == 4


# -- recovery and swarm-size search ------------------------------------------


def test_recovery_analysis():
    series = np.r_[np.full(200, 0.9), np.full(50, 0.5), np.full(300, 0.9)]
    out = recovery_analysis(series, 200, window=100)
    assert out["pre_event_average"] == pytest.approx(0.9)
    assert out["dipped"]
    # the trailing average first reaches 0.855 once at most 11 of 100 episodes are dips
    assert out["recovered_at"] == 200 + 39 + 99
    assert out["recovered"]
    assert not recovery_analysis(series, 200, window=100, budget=50)["recovered"]


def test_recovery_needs_full_windows():
    with pytest.raises(ConfigError):
        recovery_analysis(np.ones(150), 60, window=100)


def test_removal_below_hot_cells_rejected():
    with pytest.raises(ConfigError):
        dynamic_swarm_event(ExperimentConfig(n_uavs=3), kind="remove", at_episode=10)


def test_min_uav_search_monotone():
    calls = []

    def acc(n):
        calls.append(n)
        return 0.5 + 0.1 * n

    out = min_uav_search(acc, 1, 10, threshold=0.9)
    assert out["n"] == 5 and out["method"] == "binary"
    assert len(calls) < 10


def test_min_uav_search_falls_back_on_non_monotone():
    scores = {1: 0.2, 2: 0.95, 3: 0.2, 4: 0.95, 5: 0.2}
    out = min_uav_search(scores.get, 1, 5, threshold=0.9)
    assert out["method"] == "linear"
    assert out["n"] == 2


def test_min_uav_search_none():
    assert min_uav_search(lambda n: 0.1, 1, 4)["n"] is None


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.floats(0, 1), min_size=1, max_size=12), threshold=st.floats(0, 1))
def test_min_uav_search_matches_linear_scan(values, threshold):
    def linear(vals):
        return next((n for n in range(1, len(vals) + 1) if vals[n - 1] > threshold), None)

    monotone = sorted(values)
    out = min_uav_search(lambda n: monotone[n - 1], 1, len(monotone), threshold)
    assert out["n"] == linear(monotone) and out["method"] == "binary"
    out = min_uav_search(lambda n: values[n - 1], 1, len(values), threshold)
    if out["method"] == "linear":
        assert out["n"] == linear(values)
    elif out["n"] is not None:
        assert values[out["n"] - 1] > threshold
