"""Policy/value MLP with hand-written backprop, plus Adam.

The trunk is two tanh layers shared by three heads: allocate-or-not
logits (2), target-cell logits (one per grid cell) and a scalar state
value. The joint log-probability of an action is the sum of the two head
log-probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractViolation, NumericFailure

PARAM_ORDER = ("W1", "b1", "W2", "b2", "Wa", "ba", "Wc", "bc", "Wv", "bv")
CHECKPOINT_FORMAT = "swarmdist-policy"
CHECKPOINT_VERSION = 1


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def _log_softmax(z: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _entropy(p: np.ndarray, logp: np.ndarray) -> np.ndarray:
    plogp = np.where(p > 0, p * np.where(p > 0, logp, 0.0), 0.0)
    return -plogp.sum(axis=1)


@dataclass
class Forward:
    """Activations kept from a forward pass for the backward pass."""

    x: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    logp_alloc: np.ndarray
    logp_cell: np.ndarray
    value: np.ndarray

    @property
    def p_alloc(self) -> np.ndarray:
        return np.exp(self.logp_alloc)

    @property
    def p_cell(self) -> np.ndarray:
        return np.exp(self.logp_cell)


class PolicyNet:
    def __init__(self, state_size: int, n_cells: int, hidden: tuple[int, int] = (64, 64), seed: int | None = 0, zero: bool = False):
        self.state_size = int(state_size)
        self.n_cells = int(n_cells)
        self.hidden = tuple(int(h) for h in hidden)
        if len(self.hidden) != 2:
            raise ContractViolation("the trunk has exactly two hidden layers")
        h1, h2 = self.hidden
        shapes = {
            "W1": (state_size, h1),
            "b1": (h1,),
            "W2": (h1, h2),
            "b2": (h2,),
            "Wa": (h2, 2),
            "ba": (2,),
            "Wc": (h2, n_cells),
            "bc": (n_cells,),
            "Wv": (h2, 1),
            "bv": (1,),
        }
        self.params = {k: np.zeros(s) for k, s in shapes.items()}
        if not zero:
            rng = np.random.default_rng(seed)
            self.params["W1"] = _orthogonal(rng, state_size, h1, np.sqrt(2))
            self.params["W2"] = _orthogonal(rng, h1, h2, np.sqrt(2))
            self.params["Wa"] = _orthogonal(rng, h2, 2, 0.01)
            self.params["Wc"] = _orthogonal(rng, h2, n_cells, 0.01)
            self.params["Wv"] = _orthogonal(rng, h2, 1, 1.0)

    def copy(self) -> "PolicyNet":
        other = PolicyNet(self.state_size, self.n_cells, self.hidden, zero=True)
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def forward(self, x: np.ndarray, cell_mask: np.ndarray | None = None) -> Forward:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.state_size:
            raise ContractViolation(f"state has length {x.shape[1]}, network expects {self.state_size}")
        p = self.params
        h1 = np.tanh(x @ p["W1"] + p["b1"])
        h2 = np.tanh(h1 @ p["W2"] + p["b2"])
        logp_alloc = _log_softmax(h2 @ p["Wa"] + p["ba"], None)
        logp_cell = _log_softmax(h2 @ p["Wc"] + p["bc"], cell_mask)
        value = (h2 @ p["Wv"] + p["bv"])[:, 0]
        return Forward(x, h1, h2, logp_alloc, logp_cell, value)

    def policy(self, state: np.ndarray, cell_mask: np.ndarray | None = None):
        """Action distributions and value for one state (or a batch)."""
        out = self.forward(state, cell_mask)
        if np.ndim(state) == 1:
            return out.p_alloc[0], out.p_cell[0], float(out.value[0])
        return out.p_alloc, out.p_cell, out.value

    def ppo_loss(
        self,
        x: np.ndarray,
        a_alloc: np.ndarray,
        a_cell: np.ndarray,
        old_logp: np.ndarray,
        advantages: np.ndarray,
        returns: np.ndarray,
        clip_range: float,
        vf_coef: float = 0.5,
        ent_coef: float = 0.01,
        cell_mask: np.ndarray | None = None,
        want_grads: bool = True,
    ):
        """Clipped-surrogate loss (to minimise) and its gradient.

        Returns ``(loss, stats, grads)``; ``grads`` is ``None`` when
        ``want_grads`` is false.
        """
        fw = self.forward(x, cell_mask)
        b = fw.x.shape[0]
        rows = np.arange(b)
        logp = fw.logp_alloc[rows, a_alloc] + fw.logp_cell[rows, a_cell]
        ratio = np.exp(logp - old_logp)
        clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range)
        unclipped_active = ratio * advantages <= clipped * advantages
        surrogate = np.where(unclipped_active, ratio * advantages, clipped * advantages)

        p_alloc, p_cell = fw.p_alloc, fw.p_cell
        ent_alloc = _entropy(p_alloc, fw.logp_alloc)
        ent_cell = _entropy(p_cell, fw.logp_cell)
        value_err = fw.value - returns

        policy_loss = -surrogate.mean()
        value_loss = np.mean(value_err**2)
        entropy = np.mean(ent_alloc + ent_cell)
        loss = policy_loss + vf_coef * value_loss - ent_coef * entropy
        if not np.isfinite(loss):
            raise NumericFailure(
                f"non-finite PPO loss (policy={policy_loss}, value={value_loss}, entropy={entropy}, "
                f"max|ratio|={np.max(np.abs(ratio))})"
            )
        stats = {
            "loss": float(loss),
            "policy_loss": float(policy_loss),
            "value_loss": float(value_loss),
            "entropy": float(entropy),
            "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip_range)),
            "approx_kl": float(np.mean((ratio - 1.0) - np.log(ratio))),
        }
        if not want_grads:
            return loss, stats, None

        d_logp = np.where(unclipped_active, -advantages * ratio, 0.0) / b
        d_za = d_logp[:, None] * (np.eye(2)[a_alloc] - p_alloc)
        d_zc = -p_cell * d_logp[:, None]
        d_zc[rows, a_cell] += d_logp
        # entropy term: dH/dz = -p (log p + H)
        safe_la = np.where(p_alloc > 0, fw.logp_alloc, 0.0)
        safe_lc = np.where(p_cell > 0, fw.logp_cell, 0.0)
        d_za += (ent_coef / b) * p_alloc * (safe_la + ent_alloc[:, None])
        d_zc += (ent_coef / b) * p_cell * (safe_lc + ent_cell[:, None])
        d_v = (2.0 * vf_coef / b) * value_err

        p = self.params
        grads = {}
        h1, h2 = fw.h1, fw.h2
        grads["Wa"] = h2.T @ d_za
        grads["ba"] = d_za.sum(axis=0)
        grads["Wc"] = h2.T @ d_zc
        grads["bc"] = d_zc.sum(axis=0)
        grads["Wv"] = h2.T @ d_v[:, None]
        grads["bv"] = np.array([d_v.sum()])
        d_h2 = d_za @ p["Wa"].T + d_zc @ p["Wc"].T + d_v[:, None] @ p["Wv"].T
        d_a2 = d_h2 * (1.0 - h2**2)
        grads["W2"] = h1.T @ d_a2
        grads["b2"] = d_a2.sum(axis=0)
        d_a1 = (d_a2 @ p["W2"].T) * (1.0 - h1**2)
        grads["W1"] = fw.x.T @ d_a1
        grads["b1"] = d_a1.sum(axis=0)
        return loss, stats, grads

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "state_size": self.state_size,
            "n_cells": self.n_cells,
            "hidden": list(self.hidden),
            "activation": "tanh",
            "params": {
                k: {"shape": list(self.params[k].shape), "data": self.params[k].ravel(order="C").tolist()}
                for k in PARAM_ORDER
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyNet":
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ContractViolation(f"not a policy checkpoint: format={doc.get('format')!r}")
        net = cls(doc["state_size"], doc["n_cells"], tuple(doc["hidden"]), zero=True)
        for k in PARAM_ORDER:
            entry = doc["params"][k]
            arr = np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
            if arr.shape != net.params[k].shape:
                raise ContractViolation(f"parameter {k} has shape {arr.shape}, expected {net.params[k].shape}")
            net.params[k] = arr
        return net


def save_checkpoint(net: PolicyNet, path: str | Path, meta: dict | None = None) -> None:
    doc = net.to_dict()
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path) -> PolicyNet:
    return PolicyNet.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class Adam:
    def __init__(self, params: dict, lr: float, betas=(0.9, 0.999), eps: float = 1e-5):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm and norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of a (batch, k) probability matrix."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)
