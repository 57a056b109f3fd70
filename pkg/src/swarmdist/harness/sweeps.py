"""Parameter sweeps and swarm-size experiments built on the single-run harness."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Callable, Sequence

import numpy as np

from ..baselines import InstanceSpec, alternating_suboptimal, greedy_heuristic, random_placement
from ..errors import ConfigError, InfeasiblePlanError
from ..latency_model import UavSpec
from ..ppo import PolicyNet, convergence_episode, moving_average
from .config import ExperimentConfig
from .requests import generate_requests
from .runner import MetricsReport, replay, train_policy

log = logging.getLogger(__name__)

DEVICE_SPEEDS = (256e6, 512e6, 560e6)


def device_sweep(config: ExperimentConfig, speeds: Sequence[float] = DEVICE_SPEEDS, net: PolicyNet | None = None) -> list[dict]:
    """Mean request latency with every UAV running at each speed in ``speeds``.

    One policy is trained on ``config`` (unless ``net`` is given) and the
    same request schedule is replayed at every speed. Processing speed is
    not part of the observed state, so the replays take identical actions
    and differ only in compute time.
    """
    if net is None:
        net = train_policy(config).net
    roster = config.roster()
    rows = []
    for e in speeds:
        swarm = [{"speed": float(e), "memory": u.memory, "compute": u.compute} for u in roster]
        point = config.with_overrides(swarm=swarm)
        report = MetricsReport(outcomes=replay(net, point))
        rows.append({"speed": float(e), **report.summary()})
    return rows


def _solve(instance: InstanceSpec, solver: str, seed: int):
    if solver == "greedy":
        return greedy_heuristic(instance)
    if solver == "alternating":
        return alternating_suboptimal(instance, rounds=5, restarts=2, seed=seed)
    raise ConfigError(f"unknown solver {solver!r}")


def solver_replay(config: ExperimentConfig, solver: str = "alternating") -> dict:
    """Serve the config's request schedule with a non-learning solver (budgets fresh per request)."""
    setup = config.setup()
    schedule = generate_requests(config.request_rate, config.frames, config.seed, setup.n_uavs)
    rng = np.random.default_rng(config.seed + 3)
    seed_instance = InstanceSpec(setup, 0, _covering_start(setup))
    totals, shared, failed = [], 0, 0
    for req in schedule.requests:
        start = random_placement(seed_instance, rng)
        instance = InstanceSpec(setup, req.source, start)
        try:
            res = _solve(instance, solver, config.seed + req.request_id)
        except InfeasiblePlanError:
            failed += 1
            continue
        totals.append(res.total)
        shared += res.latency.shared_bytes
    return {
        "requests": len(schedule.requests),
        "complete_requests": len(totals),
        "infeasible_requests": failed,
        "mean_latency": float(np.mean(totals)) if totals else float("nan"),
        "shared_bytes": int(shared),
    }


def _covering_start(setup):
    hot = list(setup.grid.hot_cells)
    rest = [q for q in range(setup.grid.cell_count) if q not in hot]
    return tuple((hot + rest)[: setup.n_uavs])


def memory_sweep(config: ExperimentConfig, shares: Sequence[float] = (0.8, 0.9, 1.0), solver: str = "alternating") -> list[dict]:
    """Cumulative shared bytes as every UAV's memory budget grows.

    ``shares`` are fractions of the network's total weight memory given to
    each UAV. ``solver`` is ``"rl"`` (train and replay a policy per point)
    or one of the non-learning solvers.
    """
    rows = []
    for share in shares:
        point = config.with_overrides(memory_share=float(share), swarm=None)
        if solver == "rl":
            net = train_policy(point).net
            summary = MetricsReport(outcomes=replay(net, point)).summary()
        else:
            summary = solver_replay(point, solver)
        rows.append({"memory_share": float(share), "memory": point.roster()[0].memory, **summary})
    return rows


def uav_count_sweep(config: ExperimentConfig, counts: Sequence[int], window: int = 100, tol: float = 0.01,
                    key: str = "accuracy") -> list[dict]:
    """Train once per swarm size; report the episode at which ``key`` converges."""
    rows = []
    for n in counts:
        point = config.with_overrides(n_uavs=int(n))
        result = train_policy(point)
        series = result.series(key)
        ma = moving_average(series, window)
        rows.append(
            {
                "n_uavs": int(n),
                "episodes": len(series),
                "convergence_episode": convergence_episode(series, window, tol),
                "final_average": float(ma[-1]) if ma.size else float("nan"),
            }
        )
    return rows


def recovery_analysis(series, event_episode: int, window: int = 100, fraction: float = 0.95, budget: int | None = None) -> dict:
    """Measure the dip after a swarm change and when the moving average recovers.

    The pre-event level is the mean of the ``window`` episodes before the
    event. Recovery is the first post-event episode whose trailing
    ``window`` average (over post-event episodes only) is at least
    ``fraction`` of that level.
    """
    series = np.asarray(series, dtype=float)
    if event_episode < window or event_episode >= series.size:
        raise ConfigError("the event needs a full window of episodes on both sides")
    pre = float(series[event_episode - window : event_episode].mean())
    post = series[event_episode:]
    ma = moving_average(post, window)
    target = fraction * pre
    recovered_at = None
    for k, v in enumerate(ma):
        if v >= target:
            recovered_at = event_episode + k + window - 1
            break
    dip = float(post[:window].mean()) if post.size >= window else float(post.mean())
    within = recovered_at is not None and (budget is None or recovered_at - event_episode <= budget)
    return {
        "pre_event_average": pre,
        "first_window_average": dip,
        "dipped": dip < pre,
        "target": target,
        "recovered_at": recovered_at,
        "recovered": bool(within),
    }


def dynamic_swarm_event(config: ExperimentConfig, kind: str = "add", at_episode: int = 2000, spec: UavSpec | None = None,
                        index: int = -1, window: int = 100, fraction: float = 0.95, budget: int | None = None,
                        key: str = "accuracy") -> dict:
    """Train with one UAV joining (or leaving) after ``at_episode`` episodes and measure recovery.

    Swarm size stays within [hot cells, cells]; out-of-range events are
    rejected before training starts.
    """
    n = len(config.roster())
    hot = len(config.setup().grid.hot_cells)
    cells = config.setup().grid.cell_count
    new_n = n + 1 if kind == "add" else n - 1
    if not hot <= new_n <= cells:
        raise ConfigError(f"a swarm of {new_n} UAVs is outside [{hot}, {cells}]")
    if kind == "add" and spec is None:
        spec = config.roster()[-1]
    event = {"episode": at_episode, "kind": kind, "index": index}
    if spec is not None:
        event["spec"] = {"speed": spec.speed, "memory": spec.memory, "compute": spec.compute}
    point = replace(config, events=list(config.events) + [event])
    result = train_policy(point)
    series = result.series(key)
    changed = next((k for k, e in enumerate(result.episodes) if e["n_uavs"] != n), None)
    if changed is None:
        raise ConfigError("training ended before the swarm event took effect")
    out = recovery_analysis(series, changed, window, fraction, budget)
    out.update(event_episode=changed, episodes=len(series), n_before=n, n_after=new_n)
    return out


def min_uav_search(evaluate_n: Callable[[int], float], lo: int, hi: int, threshold: float = 0.9) -> dict:
    """Smallest swarm size whose accuracy (from ``evaluate_n``) exceeds ``threshold``.

    Binary search under the monotone-feasibility assumption. The top of the
    range is always evaluated, and if any evaluated pair contradicts
    monotonicity (a pass below a failure) the range is re-scanned linearly.
    Returns ``{"n": None, ...}`` when no size in range qualifies.
    """
    if lo > hi:
        raise ConfigError("empty swarm-size range")
    scores: dict[int, float] = {}

    def ok(n):
        if n not in scores:
            scores[n] = float(evaluate_n(n))
        return scores[n] > threshold

    ok(hi)
    a, b = lo, hi
    found = None
    while a <= b:
        mid = (a + b) // 2
        if ok(mid):
            found, b = mid, mid - 1
        else:
            a = mid + 1
    passed = [n for n in scores if scores[n] > threshold]
    failed = [n for n in scores if scores[n] <= threshold]
    method = "binary"
    if any(x < y for x in passed for y in failed):
        method = "linear"
        found = next((n for n in range(lo, hi + 1) if ok(n)), None)
    return {"n": found, "scores": dict(sorted(scores.items())), "method": method}
