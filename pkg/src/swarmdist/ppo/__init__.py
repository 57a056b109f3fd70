"""From-scratch PPO learner for the swarm environment."""

from .network import Adam, PolicyNet, clip_grad_norm, load_checkpoint, sample_categorical, save_checkpoint
from .rollout import RolloutBuffer, compute_advantages
from .trainer import (
    SwarmEvent,
    TrainConfig,
    TrainResult,
    convergence_episode,
    evaluate,
    moving_average,
    ppo_update,
    run_episode,
    select_actions,
    train,
)

__all__ = [
    "Adam",
    "PolicyNet",
    "RolloutBuffer",
    "SwarmEvent",
    "TrainConfig",
    "TrainResult",
    "clip_grad_norm",
    "compute_advantages",
    "convergence_episode",
    "evaluate",
    "load_checkpoint",
    "moving_average",
    "ppo_update",
    "run_episode",
    "sample_categorical",
    "save_checkpoint",
    "select_actions",
    "train",
]
