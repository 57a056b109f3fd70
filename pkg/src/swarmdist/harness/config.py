"""Experiment configuration: one versioned JSON document per run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from ..cnn_catalog import NetworkSpec, network_to_dict, resolve_network
from ..errors import ConfigError
from ..latency_model import SwarmSetup, UavSpec
from ..ppo.trainer import SwarmEvent, TrainConfig
from ..radio_grid import GridConfig, RadioParams
from ..swarm_mdp import EpisodeConfig

SCHEMA_VERSION = 1
DEFAULT_SPEEDS = (560e6, 512e6, 256e6)
MEMORY_SHARE = 0.8
COMPUTE_SHARE = 0.6


def default_swarm(network: NetworkSpec, n_uavs: int, speeds=DEFAULT_SPEEDS,
                  memory_share: float = MEMORY_SHARE, compute_share: float = COMPUTE_SHARE) -> tuple[UavSpec, ...]:
    """Identical budgets for every UAV, cycling through ``speeds``.

    Budgets are a share of the whole network's memory and compute (never
    below the largest single layer), so a share under 1 forces the request
    to be split across UAVs.
    """
    if n_uavs < 1:
        raise ConfigError("the swarm needs at least one UAV")
    memory = max(max(network.memory), memory_share * network.total_memory)
    compute = max(max(network.compute), compute_share * network.total_compute)
    return tuple(UavSpec(float(speeds[i % len(speeds)]), float(memory), float(compute)) for i in range(n_uavs))


def _strict(cls, doc: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from exc


@dataclass
class ExperimentConfig:
    scenario: str = "default"
    network: Any = "LeNet"
    n_uavs: int = 5
    # explicit roster as [{"speed", "memory", "compute"}]; overrides n_uavs when given
    swarm: list | None = None
    memory_share: float = MEMORY_SHARE
    compute_share: float = COMPUTE_SHARE
    grid: dict = field(default_factory=dict)
    radio: dict = field(default_factory=dict)
    request_rate: float = 5.0
    frames: int = 20
    # "request": budgets restored before every request; "frame": only at frame starts
    budget_scope: str = "request"
    qos_factor: float = 0.0
    penalty_scale: float = 0.003
    train: dict = field(default_factory=dict)
    total_steps: int = 500_000
    mode: str = "joint"
    static_schedule: list | None = None
    events: list = field(default_factory=list)
    deterministic_eval: bool = True
    seed: int = 0
    out_dir: str = "runs/default"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"config schema version {self.schema_version} is not supported (expected {SCHEMA_VERSION})")
        if self.mode not in ("joint", "static"):
            raise ConfigError(f"mode must be 'joint' or 'static', got {self.mode!r}")
        if self.mode == "static" and not self.static_schedule:
            raise ConfigError("static mode needs a static_schedule")
        if self.budget_scope not in ("request", "frame"):
            raise ConfigError(f"budget_scope must be 'request' or 'frame', got {self.budget_scope!r}")
        if self.request_rate <= 0 or self.frames < 1:
            raise ConfigError("request_rate and frames must be positive")
        if self.total_steps < 1:
            raise ConfigError("total_steps must be positive")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        # build everything once so bad values surface before any run
        self.episode_config()
        self.train_config()
        self.swarm_events()

    # -- derived objects ---------------------------------------------------

    def network_spec(self) -> NetworkSpec:
        try:
            return resolve_network(self.network)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot resolve network {self.network!r}: {exc}") from exc

    def roster(self) -> tuple[UavSpec, ...]:
        if self.swarm is not None:
            return tuple(_strict(UavSpec, dict(u), "swarm entry") for u in self.swarm)
        return default_swarm(self.network_spec(), self.n_uavs, memory_share=self.memory_share, compute_share=self.compute_share)

    def setup(self) -> SwarmSetup:
        grid = dict(self.grid)
        if "hot_cells" in grid:
            grid["hot_cells"] = tuple(grid["hot_cells"])
        return SwarmSetup(
            self.network_spec(),
            self.roster(),
            _strict(GridConfig, grid, "grid"),
            _strict(RadioParams, dict(self.radio), "radio"),
        )

    def episode_config(self) -> EpisodeConfig:
        schedule = None
        if self.mode == "static":
            schedule = tuple(tuple(int(q) for q in p) for p in self.static_schedule)
        return EpisodeConfig(
            self.setup(),
            qos_factor=self.qos_factor,
            penalty_scale=self.penalty_scale,
            static_schedule=schedule,
        )

    def train_config(self) -> TrainConfig:
        return _strict(TrainConfig, dict(self.train), "train")

    def swarm_events(self) -> list[SwarmEvent]:
        out = []
        for doc in self.events:
            doc = dict(doc)
            if doc.get("spec") is not None:
                doc["spec"] = _strict(UavSpec, dict(doc["spec"]), "event spec")
            out.append(_strict(SwarmEvent, doc, "event"))
        return out

    # -- serialisation -----------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return _strict(cls, dict(doc), "config")

    def to_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        if isinstance(self.network, NetworkSpec):
            doc["network"] = network_to_dict(self.network)
        return json.loads(json.dumps(doc))

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(clean) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown override keys: {', '.join(sorted(unknown))}")
        if "n_uavs" in clean and "swarm" not in clean:
            clean["swarm"] = None
        return replace(self, **clean)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(doc)
