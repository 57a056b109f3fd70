"""Experiment orchestration: configs, request generation, runs, sweeps and the CLI."""

from .config import ExperimentConfig, default_swarm, load_config
from .requests import Request, RequestSchedule, generate_requests
from .runner import MetricsReport, replay, run_experiment, train_policy
from .sweeps import device_sweep, dynamic_swarm_event, memory_sweep, min_uav_search, recovery_analysis, uav_count_sweep

__all__ = [
    "ExperimentConfig",
    "MetricsReport",
    "Request",
    "RequestSchedule",
    "default_swarm",
    "device_sweep",
    "dynamic_swarm_event",
    "generate_requests",
    "load_config",
    "memory_sweep",
    "min_uav_search",
    "recovery_analysis",
    "replay",
    "run_experiment",
    "train_policy",
    "uav_count_sweep",
]
