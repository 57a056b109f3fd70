"""Train (or load) a policy, replay a Poisson request schedule and write the run's artifacts."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..latency_model import LatencyBreakdown, total_latency, validate_plan
from ..ppo import PolicyNet, TrainResult, load_checkpoint, run_episode, save_checkpoint, train
from ..swarm_mdp import SwarmEnv
from .config import ExperimentConfig
from .requests import generate_requests

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "request", "frame", "source", "step", "layer", "uav", "a1", "a2",
    "cons1", "cons2", "cons3", "allocated", "reward", "penalty", "qos", "coverage",
)
REWARD_COLUMNS = ("episode", "cumulative_reward", "penalty", "accuracy", "coverage", "feasible", "n_uavs")
LATENCY_COLUMNS = (
    "request", "frame", "source", "assignment", "source_transfer", "compute", "transfer",
    "total", "shared_bytes", "violations",
)

SCHEMA = {
    "trace.csv": {
        "request": "request index in the replayed schedule",
        "frame": "frame the request arrived in; budgets reset at each new frame",
        "source": "UAV that captured the image",
        "step": "step within the episode (layer-major, UAV-minor)",
        "layer": "layer under the cursor",
        "uav": "UAV under the cursor",
        "a1": "1 if the UAV asked to run the layer",
        "a2": "cell the UAV asked to move to",
        "cons1": "one-allocation-per-layer check (0/1)",
        "cons2": "cell check (0/1)",
        "cons3": "resource check (0/1)",
        "allocated": "1 if the layer was assigned at this step",
        "reward": "step reward",
        "penalty": "unscaled latency charged at this step (s)",
        "qos": "hot-cell bonus at this step",
        "coverage": "fraction of hot cells occupied after the step",
    },
    "rewards.csv": {
        "episode": "training episode index (completion order)",
        "cumulative_reward": "sum of step rewards in the episode",
        "penalty": "sum of unscaled latency penalties (s)",
        "accuracy": "fraction of steps whose three checks all held",
        "coverage": "mean hot-cell coverage over the episode's steps",
        "feasible": "1 if every step of the episode held all checks",
        "n_uavs": "swarm size during the episode",
    },
    "latency.csv": {
        "request": "request index",
        "frame": "frame index",
        "source": "source UAV",
        "assignment": "space-separated UAV per layer",
        "source_transfer": "seconds to ship the image to the first layer's UAV",
        "compute": "total compute seconds",
        "transfer": "total seconds of inter-layer transfers",
        "total": "end-to-end latency (s)",
        "shared_bytes": "bytes exchanged between UAVs",
        "violations": "space-separated violated constraint tags (empty when valid)",
    },
}


@dataclass
class RequestOutcome:
    request_id: int
    frame: int
    source: int
    summary: dict
    infos: list
    assignment: tuple
    latency: LatencyBreakdown | None
    violations: list


@dataclass
class MetricsReport:
    training: list[dict] = field(default_factory=list)
    outcomes: list[RequestOutcome] = field(default_factory=list)
    wall_clock: float = 0.0
    train_steps: int = 0

    @property
    def latencies(self) -> list[LatencyBreakdown]:
        return [o.latency for o in self.outcomes if o.latency is not None]

    @property
    def shared_bytes(self) -> int:
        return int(sum(l.shared_bytes for l in self.latencies))

    @property
    def mean_latency(self) -> float:
        lat = self.latencies
        return float(np.mean([l.total for l in lat])) if lat else float("nan")

    @property
    def accuracy(self) -> float:
        steps = [s for o in self.outcomes for s in o.infos]
        if not steps:
            return float("nan")
        return sum(1 for s in steps if s["cons1"] and s["cons2"] and s["cons3"]) / len(steps)

    @property
    def feasible_fraction(self) -> float:
        if not self.outcomes:
            return float("nan")
        return sum(1 for o in self.outcomes if o.summary["feasible"]) / len(self.outcomes)

    @property
    def coverage(self) -> float:
        steps = [s["coverage"] for o in self.outcomes for s in o.infos]
        return float(np.mean(steps)) if steps else float("nan")

    def summary(self) -> dict:
        infos = [s for o in self.outcomes for s in o.infos]
        return {
            "requests": len(self.outcomes),
            "complete_requests": len(self.latencies),
            "mean_latency": self.mean_latency,
            "total_latency": float(sum(l.total for l in self.latencies)),
            "shared_bytes": self.shared_bytes,
            "accuracy": self.accuracy,
            "feasible_fraction": self.feasible_fraction,
            "coverage": self.coverage,
            "total_reward": float(sum(s["reward"] for s in infos)),
            "total_penalty": float(sum(s["penalty"] for s in infos)),
            "training_episodes": len(self.training),
            "train_steps": self.train_steps,
        }


def make_env_factory(config: ExperimentConfig):
    episode_config = config.episode_config()
    return lambda seed: SwarmEnv(episode_config, seed)


def train_policy(config: ExperimentConfig, progress=None) -> TrainResult:
    return train(
        make_env_factory(config),
        config.train_config(),
        config.total_steps,
        seed=config.seed,
        events=config.swarm_events(),
        progress=progress,
    )


def replay(net: PolicyNet, config: ExperimentConfig, seed: int | None = None) -> list[RequestOutcome]:
    """Serve the config's Poisson schedule with ``net``.

    Budgets are restored before every request, or only at frame boundaries
    when ``config.budget_scope == "frame"``.
    """
    seed = config.seed if seed is None else seed
    env = SwarmEnv(config.episode_config(), seed + 1)
    for event in config.swarm_events():
        event.apply(env)
    schedule = generate_requests(config.request_rate, config.frames, seed, env.n)
    rng = np.random.default_rng(seed + 2)
    outcomes = []
    for frame, requests in schedule.by_frame():
        for k, req in enumerate(requests):
            fresh = k == 0 or config.budget_scope == "request"
            if fresh:
                used_mem = np.zeros(env.n)
                used_comp = np.zeros(env.n)
            summary, infos = run_episode(net, env, rng, config.deterministic_eval, source=req.source, new_frame=fresh)
            plan = env.plan(req.request_id)
            violations = validate_plan(plan, env.setup, hot_cells=(), consumed=(used_mem, used_comp))
            latency = None
            if plan.complete:
                latency = total_latency(plan, env.setup, validate=False)
                for j, u in enumerate(plan.assignment):
                    used_mem[u] += env.setup.network.memory[j]
                    used_comp[u] += env.setup.network.compute[j]
            outcomes.append(RequestOutcome(req.request_id, frame, req.source, summary, infos, plan.assignment, latency, violations))
    return outcomes


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def trace_rows(outcomes: list[RequestOutcome]):
    for o in outcomes:
        for step, s in enumerate(o.infos):
            yield {"request": o.request_id, "frame": o.frame, "source": o.source, "step": step, **s}


def reward_rows(training: list[dict]):
    for e in training:
        yield {
            "episode": e["episode"],
            "cumulative_reward": e["reward"],
            "penalty": e["penalty"],
            "accuracy": e["accuracy"],
            "coverage": e["coverage"],
            "feasible": e["feasible"],
            "n_uavs": e["n_uavs"],
        }


def latency_rows(outcomes: list[RequestOutcome]):
    for o in outcomes:
        if o.latency is None:
            continue
        yield {
            "request": o.request_id,
            "frame": o.frame,
            "source": o.source,
            "assignment": " ".join(str(u) for u in o.assignment),
            **o.latency.as_row(),
            "violations": " ".join(o.violations),
        }


def write_artifacts(report: MetricsReport, config: ExperimentConfig, out_dir: str | Path, net: PolicyNet | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trace.csv", TRACE_COLUMNS, trace_rows(report.outcomes))
    _write_csv(out / "rewards.csv", REWARD_COLUMNS, reward_rows(report.training))
    _write_csv(out / "latency.csv", LATENCY_COLUMNS, latency_rows(report.outcomes))
    (out / "schema.json").write_text(json.dumps(SCHEMA, indent=2) + "\n", encoding="utf-8")
    doc = {"config": config.to_dict(), "metrics": report.summary(), "wall_clock_seconds": report.wall_clock}
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if net is not None:
        save_checkpoint(net, out / "policy.json", meta={"scenario": config.scenario, "seed": config.seed})
    return out


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None, checkpoint: str | Path | None = None,
                   write: bool = True) -> MetricsReport:
    """Train (unless ``checkpoint`` is given), replay the request schedule and write outputs."""
    start = time.perf_counter()
    report = MetricsReport()
    if checkpoint is not None:
        net = load_checkpoint(checkpoint)
    else:
        result = train_policy(config)
        net = result.net
        report.training = result.episodes
        report.train_steps = result.steps
    report.outcomes = replay(net, config)
    report.wall_clock = time.perf_counter() - start
    if write:
        write_artifacts(report, config, out_dir or config.out_dir, net)
    log.info("run %s finished: %s", config.scenario, report.summary())
    return report


def read_trace_totals(path: str | Path) -> dict:
    """Recompute report totals from a written trace.csv."""
    reward = penalty = 0.0
    ok = steps = 0
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            reward += float(row["reward"])
            penalty += float(row["penalty"])
            ok += int(row["cons1"]) and int(row["cons2"]) and int(row["cons3"])
            steps += 1
    return {"total_reward": reward, "total_penalty": penalty, "accuracy": ok / steps if steps else float("nan")}


def read_latency_totals(path: str | Path) -> dict:
    total = 0.0
    shared = 0
    n = 0
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            total += float(row["total"])
            shared += int(row["shared_bytes"])
            n += 1
    return {"total_latency": total, "shared_bytes": shared, "complete_requests": n}

