"""PPO training loop for the swarm environment.

Rollouts are collected from ``n_envs`` independent environments stepping
in lockstep (one batched forward pass per step); gradient updates are
applied to a single parameter set afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError, ContractViolation, NumericFailure
from ..latency_model import UavSpec
from ..swarm_mdp import SwarmEnv
from .network import Adam, PolicyNet, clip_grad_norm, sample_categorical
from .rollout import RolloutBuffer

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    batch_size: int = 512
    clip_range: float = 0.2
    gae_lambda: float = 0.95
    n_epochs: int = 4
    # initial exploration level; 1.0 means the policy starts near-uniform
    exploration: float = 1.0
    minibatch_size: int = 32
    vf_coef: float = 0.5
    ent_coef: float = 0.02
    max_grad_norm: float = 0.5
    n_envs: int = 8
    hidden: tuple[int, int] = (64, 64)
    normalize_advantage: bool = True
    recompute_advantages: bool = True

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if self.batch_size % self.n_envs:
            raise ConfigError("batch_size must be a multiple of n_envs")
        if not 0 < self.clip_range < 1:
            raise ConfigError("clip_range must lie in (0, 1)")
        if not (0 <= self.gamma <= 1 and 0 <= self.gae_lambda <= 1):
            raise ConfigError("gamma and gae_lambda must lie in [0, 1]")
        if self.learning_rate <= 0 or self.n_epochs < 1 or self.minibatch_size < 1:
            raise ConfigError("learning_rate, n_epochs and minibatch_size must be positive")
        if not 0 <= self.exploration <= 1:
            raise ConfigError("exploration must lie in [0, 1]")

    @property
    def n_steps(self) -> int:
        return self.batch_size // self.n_envs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class SwarmEvent:
    """Add or remove a UAV once ``episode`` episodes have finished."""

    episode: int
    kind: str
    spec: UavSpec | None = None
    index: int = -1

    def __post_init__(self):
        if self.kind not in ("add", "remove"):
            raise ConfigError(f"unknown swarm event {self.kind!r}")
        if self.kind == "add" and self.spec is None:
            raise ConfigError("an add event needs a UAV spec")

    def apply(self, env: SwarmEnv) -> None:
        if self.kind == "add":
            env.add_uav(self.spec)
        else:
            env.remove_uav(self.index)


@dataclass
class TrainResult:
    net: PolicyNet
    episodes: list[dict] = field(default_factory=list)
    updates: list[dict] = field(default_factory=list)
    steps: int = 0

    def series(self, key: str) -> np.ndarray:
        return np.array([e[key] for e in self.episodes], dtype=float)


def _cell_mask(forced: Sequence[int], n_cells: int) -> np.ndarray | None:
    forced = np.asarray(forced)
    if np.all(forced < 0):
        return None
    mask = np.ones((len(forced), n_cells), dtype=bool)
    rows = np.flatnonzero(forced >= 0)
    mask[rows] = False
    mask[rows, forced[rows]] = True
    return mask


def select_actions(net: PolicyNet, obs: np.ndarray, forced, rng: np.random.Generator, deterministic: bool = False):
    """Pick (a1, a2) for a batch of states; returns actions, joint log-prob and value."""
    mask = _cell_mask(forced, net.n_cells)
    fw = net.forward(obs, mask)
    if deterministic:
        a1 = fw.logp_alloc.argmax(axis=1)
        a2 = fw.logp_cell.argmax(axis=1)
    else:
        a1 = sample_categorical(fw.p_alloc, rng)
        a2 = sample_categorical(fw.p_cell, rng)
    rows = np.arange(len(a1))
    logp = fw.logp_alloc[rows, a1] + fw.logp_cell[rows, a2]
    return a1, a2, logp, fw.value


def ppo_update(buffer: RolloutBuffer, net: PolicyNet, config: TrainConfig, optimizer: Adam, rng: np.random.Generator) -> dict:
    """Run ``n_epochs`` passes of clipped-surrogate minibatch updates over the buffer."""
    stats_acc: dict[str, list[float]] = {}
    grad_norms = []
    for epoch in range(config.n_epochs):
        if config.recompute_advantages and epoch > 0:
            buffer.refresh(lambda x: net.forward(x).value)
        data = buffer.flat()
        adv = data["advantages"]
        if config.normalize_advantage and adv.size > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        size = adv.size
        order = rng.permutation(size)
        for start in range(0, size, config.minibatch_size):
            idx = order[start : start + config.minibatch_size]
            mask = None if data["mask"] is None else data["mask"][idx]
            _, stats, grads = net.ppo_loss(
                data["obs"][idx],
                data["a_alloc"][idx],
                data["a_cell"][idx],
                data["logp"][idx],
                adv[idx],
                data["returns"][idx],
                config.clip_range,
                config.vf_coef,
                config.ent_coef,
                cell_mask=mask,
            )
            norm = clip_grad_norm(grads, config.max_grad_norm)
            if not np.isfinite(norm):
                raise NumericFailure(f"non-finite gradient norm in epoch {epoch}: {stats}")
            optimizer.step(net.params, grads)
            grad_norms.append(norm)
            for k, v in stats.items():
                stats_acc.setdefault(k, []).append(v)
    out = {k: float(np.mean(v)) for k, v in stats_acc.items()}
    out["grad_norm"] = float(np.mean(grad_norms))
    return out


def train(
    env_factory: Callable[[int], SwarmEnv],
    config: TrainConfig,
    total_steps: int,
    seed: int = 0,
    events: Sequence[SwarmEvent] = (),
    net: PolicyNet | None = None,
    progress: Callable[[TrainResult], None] | None = None,
) -> TrainResult:
    """Collect ``batch_size`` steps and update, for ``total_steps // batch_size`` rounds (at least one).

    ``env_factory(seed)`` must return a fresh environment. Per-episode
    summaries (reward, penalty, accuracy, coverage, ...) are accumulated in
    completion order.
    """
    seeds = np.random.SeedSequence(seed).spawn(config.n_envs + 2)
    envs = [env_factory(int(s.generate_state(1)[0])) for s in seeds[: config.n_envs]]
    sample_rng = np.random.default_rng(seeds[-2])
    update_rng = np.random.default_rng(seeds[-1])
    n_cells = envs[0].cells
    state_size = envs[0].state_size
    if net is None:
        net = PolicyNet(state_size, n_cells, config.hidden, seed=int(seeds[-2].generate_state(1)[0]))
    elif net.state_size != state_size or net.n_cells != n_cells:
        raise ContractViolation("network shape does not match the environment")
    optimizer = Adam(net.params, config.learning_rate)
    result = TrainResult(net)
    pending = sorted(events, key=lambda e: e.episode)
    applied = [0] * config.n_envs

    obs = np.stack([env.reset() for env in envs])
    buffer = RolloutBuffer(config.n_steps, config.n_envs, state_size, n_cells)
    steps = 0
    for _ in range(max(1, total_steps // config.batch_size)):
        buffer.clear()
        while not buffer.full:
            forced = [env.forced_cell() if env.forced_cell() is not None else -1 for env in envs]
            a1, a2, logp, values = select_actions(net, obs, forced, sample_rng)
            rewards = np.zeros(config.n_envs)
            dones = np.zeros(config.n_envs)
            next_obs = np.empty_like(obs)
            for k, env in enumerate(envs):
                try:
                    o, r, d, _ = env.step(a1[k], a2[k])
                except Exception as exc:
                    raise type(exc)(f"{exc} (env {k}, episode {len(result.episodes)})") from exc
                rewards[k], dones[k] = r, d
                if d:
                    summary = env.episode_summary()
                    summary.update(episode=len(result.episodes), env=k, step=steps + 1, n_uavs=env.n)
                    result.episodes.append(summary)
                    while applied[k] < len(pending) and pending[applied[k]].episode <= len(result.episodes):
                        pending[applied[k]].apply(env)
                        applied[k] += 1
                    o = env.reset()
                next_obs[k] = o
            buffer.add(obs, a1, a2, forced, logp, rewards, values, dones)
            obs = next_obs
            steps += config.n_envs
        last_values = net.forward(obs).value
        buffer.finish(obs, last_values, config.gamma, config.gae_lambda)
        stats = ppo_update(buffer, net, config, optimizer, update_rng)
        stats["steps"] = steps
        result.updates.append(stats)
        if progress is not None:
            progress(result)
    result.steps = steps
    return result


def run_episode(net: PolicyNet, env: SwarmEnv, rng: np.random.Generator, deterministic: bool = False, **reset_kwargs):
    """Play one episode with ``net``; returns (summary, per-step infos)."""
    obs = env.reset(**reset_kwargs)
    infos = []
    done = False
    while not done:
        forced = env.forced_cell()
        a1, a2, _, _ = select_actions(net, obs[None, :], [forced if forced is not None else -1], rng, deterministic)
        obs, _, done, info = env.step(a1[0], a2[0])
        infos.append(info)
    return env.episode_summary(), infos


def evaluate(net: PolicyNet, env: SwarmEnv, episodes: int, seed: int = 0, deterministic: bool = False) -> list[dict]:
    rng = np.random.default_rng(seed)
    return [run_episode(net, env, rng, deterministic)[0] for _ in range(episodes)]


def moving_average(values, window: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.size < window:
        return np.array([])
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def convergence_episode(values, window: int = 100, tol: float = 0.01) -> int | None:
    """First episode whose trailing ``window`` average moves by less than ``tol`` (relative)
    versus the previous window; ``None`` when the curve never settles."""
    ma = moving_average(values, window)
    for k in range(window, ma.size):
        prev, cur = ma[k - window], ma[k]
        if abs(cur - prev) <= tol * max(abs(prev), 1e-12):
            return k + window - 1
    return None
