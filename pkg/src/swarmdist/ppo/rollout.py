"""On-policy rollout storage and generalized advantage estimation."""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolation


def compute_advantages(rewards, values, dones, last_value, gamma: float, lam: float):
    """GAE(gamma, lambda) over a time-major trajectory.

    ``dones[t]`` is true when the episode ended after step ``t``; the value
    of the state after the final stored step is ``last_value`` and is only
    used if that step did not end an episode. Arrays may carry a trailing
    environment axis. Returns ``(advantages, returns)`` with
    ``returns = advantages + values``.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if rewards.shape[0] == 0:
        raise ContractViolation("cannot compute advantages of an empty rollout")
    if not (rewards.shape == values.shape == dones.shape):
        raise ContractViolation("rewards, values and dones must share a shape")
    next_value = np.asarray(last_value, dtype=float) * np.ones_like(values[0])
    adv = np.zeros_like(rewards)
    running = np.zeros_like(values[0])
    for t in range(rewards.shape[0] - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


class RolloutBuffer:
    """Fixed-size time-major buffer for ``n_envs`` environments stepping in lockstep."""

    def __init__(self, n_steps: int, n_envs: int, state_size: int, n_cells: int):
        self.n_steps, self.n_envs = n_steps, n_envs
        self.n_cells = n_cells
        shape = (n_steps, n_envs)
        self.obs = np.zeros(shape + (state_size,))
        self.a_alloc = np.zeros(shape, dtype=int)
        self.a_cell = np.zeros(shape, dtype=int)
        self.forced = np.full(shape, -1, dtype=int)
        self.logp = np.zeros(shape)
        self.rewards = np.zeros(shape)
        self.values = np.zeros(shape)
        self.dones = np.zeros(shape)
        self.advantages = None
        self.returns = None
        self.pos = 0

    @property
    def full(self) -> bool:
        return self.pos >= self.n_steps

    def add(self, obs, a_alloc, a_cell, forced, logp, rewards, values, dones) -> None:
        if self.full:
            raise ContractViolation("rollout buffer is full")
        t = self.pos
        self.obs[t] = obs
        self.a_alloc[t] = a_alloc
        self.a_cell[t] = a_cell
        self.forced[t] = forced
        self.logp[t] = logp
        self.rewards[t] = rewards
        self.values[t] = values
        self.dones[t] = dones
        self.pos += 1

    def finish(self, last_obs, last_values, gamma: float, lam: float) -> None:
        if self.pos == 0:
            raise ContractViolation("cannot finish an empty rollout")
        self.last_obs = np.asarray(last_obs, dtype=float)
        self.gamma, self.lam = gamma, lam
        n = self.pos
        self.advantages, self.returns = compute_advantages(
            self.rewards[:n], self.values[:n], self.dones[:n], last_values, gamma, lam
        )

    def refresh(self, value_fn) -> None:
        """Re-estimate values with ``value_fn`` (batch of states -> values) and redo GAE."""
        n = self.pos
        flat = self.obs[:n].reshape(n * self.n_envs, -1)
        self.values[:n] = value_fn(flat).reshape(n, self.n_envs)
        last_values = value_fn(self.last_obs)
        self.advantages, self.returns = compute_advantages(
            self.rewards[:n], self.values[:n], self.dones[:n], last_values, self.gamma, self.lam
        )

    def flat(self) -> dict:
        """Flatten to (steps * envs) rows for minibatching."""
        if self.advantages is None:
            raise ContractViolation("call finish() before reading the rollout")
        n = self.pos
        size = n * self.n_envs
        forced = self.forced[:n].reshape(size)
        mask = None
        if np.any(forced >= 0):
            mask = np.ones((size, self.n_cells), dtype=bool)
            rows = np.flatnonzero(forced >= 0)
            mask[rows] = False
            mask[rows, forced[rows]] = True
        return {
            "obs": self.obs[:n].reshape(size, -1),
            "a_alloc": self.a_alloc[:n].reshape(size),
            "a_cell": self.a_cell[:n].reshape(size),
            "logp": self.logp[:n].reshape(size),
            "advantages": self.advantages.reshape(size),
            "returns": self.returns.reshape(size),
            "values": self.values[:n].reshape(size),
            "mask": mask,
        }

    def clear(self) -> None:
        self.pos = 0
        self.advantages = None
        self.returns = None
