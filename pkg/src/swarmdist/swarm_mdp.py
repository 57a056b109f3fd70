"""Episodic environment for joint layer allocation and UAV movement.

One episode distributes one inference request. The cursor walks layers in
the outer loop and UAVs in the inner loop, so an episode has
``n_layers * n_uavs`` steps and every layer owns a window of ``n_uavs``
consecutive steps. At each step the UAV under the cursor picks a cell to
fly to (``a2``) and whether to take the current layer (``a1``).

Step reward is the product of three 0/1 constraint checks, minus the
latency caused by a successful allocation (scaled by ``penalty_scale``),
plus a QoS bonus when the moving UAV ends in a hot cell.

Semantics chosen where the constraint checks leave room:

* Only allocations that pass the resource check count toward the layer
  window's allocation total. A window passes the "one allocation" check at
  every step where at most one allocation has happened so far, and its
  last step additionally requires exactly one.
* A move into a cell that was already entered this window, or that
  another UAV currently holds, fails the cell check and the UAV stays put.
  Placements therefore never contain collisions.
* Budgets persist across ``frame_requests`` consecutive episodes and are
  restored at frame boundaries; positions are re-drawn on every reset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractViolation, InfeasiblePlacementError
from .latency_model import AllocationPlan, SwarmSetup, UavSpec
from .radio_grid import Placement, are_adjacent, placement_violations

STATE_EXTRA = 4


@dataclass(frozen=True)
class EpisodeConfig:
    setup: SwarmSetup
    qos_factor: float = 0.0
    penalty_scale: float = 0.003
    frame_requests: int = 1
    initial_demand: int = 1
    static_schedule: tuple[Placement, ...] | None = None

    def __post_init__(self):
        n, c = self.setup.n_uavs, self.setup.grid.cell_count
        if n > c:
            raise InfeasiblePlacementError(f"{n} UAVs do not fit in {c} cells")
        if n < len(self.setup.grid.hot_cells):
            raise ConfigError("the swarm must have at least as many UAVs as hot cells")
        if self.qos_factor < 0 or self.penalty_scale < 0:
            raise ConfigError("qos_factor and penalty_scale must be non-negative")
        if self.frame_requests < 1:
            raise ConfigError("frame_requests must be >= 1")
        if self.static_schedule is not None:
            schedule = tuple(tuple(int(q) for q in p) for p in self.static_schedule)
            validate_schedule(schedule, self.setup)
            object.__setattr__(self, "static_schedule", schedule)

    @property
    def episode_length(self) -> int:
        return self.setup.n_layers * self.setup.n_uavs

    @property
    def state_size(self) -> int:
        return 2 * self.setup.grid.cell_count + STATE_EXTRA


def validate_schedule(schedule: Sequence[Placement], setup: SwarmSetup) -> None:
    """Reject a movement schedule that ever puts two UAVs in one cell.

    Entry ``w`` is the layout during layer window ``w`` (cycled if shorter
    than the network). UAVs move one at a time, so intermediate layouts
    are checked as well.
    """
    if not schedule:
        raise ConfigError("empty movement schedule")
    grid = setup.grid
    for p in schedule:
        if len(p) != setup.n_uavs:
            raise ConfigError(f"schedule entry {p} does not list {setup.n_uavs} UAVs")
        bad = placement_violations(p, grid)
        if bad:
            raise InfeasiblePlacementError(f"schedule entry {p} violates {', '.join(bad)}")
    current = list(schedule[0])
    for w in range(setup.n_layers):
        target = schedule[w % len(schedule)]
        for i in range(setup.n_uavs):
            if target[i] != current[i] and target[i] in current:
                raise InfeasiblePlacementError(
                    f"UAV {i} would collide entering cell {target[i]} in window {w}"
                )
            current[i] = target[i]


@dataclass
class EnvState:
    layer: int
    uav: int
    memory_left: float
    compute_left: float
    memory_cap: float
    compute_cap: float
    n_layers: int
    n_uavs: int
    positions: tuple[int, ...]
    hot_cells: tuple[int, ...]
    cell_count: int


def encode_state(state: EnvState) -> np.ndarray:
    """Flatten a state to ``[layer, uav, memory, compute] + positions + hot cells``.

    The four scalars are scaled to [0, 1]; the two blocks are 0/1 vectors
    over the grid cells.
    """
    c = state.cell_count
    out = np.zeros(2 * c + STATE_EXTRA)
    out[0] = state.layer / (state.n_layers - 1) if state.n_layers > 1 else 0.0
    out[1] = state.uav / (state.n_uavs - 1) if state.n_uavs > 1 else 0.0
    out[2] = state.memory_left / state.memory_cap if state.memory_cap > 0 else 0.0
    out[3] = state.compute_left / state.compute_cap if state.compute_cap > 0 else 0.0
    out[STATE_EXTRA + np.asarray(state.positions, dtype=int)] = 1.0
    if state.hot_cells:
        out[STATE_EXTRA + c + np.asarray(state.hot_cells, dtype=int)] = 1.0
    return out


def check_cons1(window_allocations: Sequence[int], window_size: int | None = None) -> bool:
    """One-allocation-per-layer check over the window's steps so far.

    ``window_allocations`` holds 1 for every step of the window whose
    allocation went through. Before the window closes at most one is
    allowed; once ``window_size`` steps are in, exactly one is required.
    """
    total = int(sum(window_allocations))
    if window_size is None or len(window_allocations) >= window_size:
        return total == 1
    return total <= 1


def check_cons2(visited: Sequence[int] | set, target: int, occupied_by_others: Sequence[int] | set = ()) -> bool:
    return target not in visited and target not in occupied_by_others


def check_cons3(layer_memory: float, layer_compute: float, memory_left: float, compute_left: float, allocate: bool = True) -> bool:
    if not allocate:
        return True
    return layer_memory <= memory_left and layer_compute <= compute_left


def qos_reward(qos_factor: float, demand: Sequence[float]) -> float:
    if any(d < 0 for d in demand):
        raise ContractViolation("hot-cell demand must be non-negative")
    return qos_factor / (1.0 + float(sum(demand)))


class SwarmEnv:
    """Sequential environment; one instance is not safe to share across threads."""

    def __init__(self, config: EpisodeConfig, seed: int | None = None):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self._episodes_in_frame = 0
        self._needs_frame_reset = True
        self.done = True
        self._load_setup(config.setup)

    # -- configuration -----------------------------------------------------

    def _load_setup(self, setup: SwarmSetup) -> None:
        self.setup = setup
        self.network = setup.network
        self.links = setup.links
        self.n = setup.n_uavs
        self.n_layers = setup.n_layers
        self.cells = setup.grid.cell_count
        self.hot = setup.grid.hot_cells
        self._hot_set = frozenset(self.hot)
        self.mem_cap = np.array([u.memory for u in setup.swarm], dtype=float)
        self.comp_cap = np.array([u.compute for u in setup.swarm], dtype=float)
        self.speed = setup.speeds
        self.layer_mem = np.array(setup.network.memory, dtype=float)
        self.layer_comp = np.array(setup.network.compute, dtype=float)
        self._needs_frame_reset = True

    @property
    def state_size(self) -> int:
        return 2 * self.cells + STATE_EXTRA

    @property
    def episode_length(self) -> int:
        return self.n_layers * self.n

    def _set_swarm(self, swarm: Sequence[UavSpec]) -> None:
        if not self.done:
            raise ContractViolation("the swarm can only change between episodes")
        n = len(swarm)
        if n < len(self.hot):
            raise ConfigError(f"{n} UAVs cannot cover {len(self.hot)} hot cells")
        if n > self.cells:
            raise ConfigError(f"{n} UAVs do not fit in {self.cells} cells")
        if self.config.static_schedule is not None:
            raise ConfigError("swarm changes are not supported with a static schedule")
        setup = self.setup.with_swarm(swarm)
        self.config = replace(self.config, setup=setup)
        self._load_setup(setup)

    def add_uav(self, spec: UavSpec) -> None:
        self._set_swarm(self.setup.swarm + (spec,))

    def remove_uav(self, index: int = -1) -> UavSpec:
        swarm = list(self.setup.swarm)
        removed = swarm.pop(index)
        self._set_swarm(swarm)
        return removed

    # -- episode control ---------------------------------------------------

    def reset(self, seed: int | None = None, source: int | None = None, new_frame: bool | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        if new_frame is None:
            new_frame = self._needs_frame_reset or self._episodes_in_frame >= self.config.frame_requests
        if new_frame:
            self.mem_left = self.mem_cap.copy()
            self.comp_left = self.comp_cap.copy()
            self._episodes_in_frame = 0
            self._needs_frame_reset = False
        self._episodes_in_frame += 1

        schedule = self.config.static_schedule
        if schedule is not None:
            self.positions = np.array(schedule[0], dtype=int)
        else:
            self.positions = self.rng.choice(self.cells, size=self.n, replace=False).astype(int)
        if source is None:
            source = int(self.rng.integers(self.n))
        elif not 0 <= source < self.n:
            raise ContractViolation(f"source UAV {source} not in swarm of {self.n}")
        self.source = int(source)

        self.t = 0
        self.done = False
        self.assignment: list[int | None] = [None] * self.n_layers
        self.snapshots: list[Placement | None] = [None] * self.n_layers
        self.window_allocs: list[int] = []
        self.visited: set[int] = set()
        self.demand = {q: float(self.config.initial_demand) for q in self.hot}
        self.episode_reward = 0.0
        self.episode_penalty = 0.0
        self.steps_ok = 0
        self.coverage_sum = 0.0
        return self.observe()

    @property
    def layer(self) -> int:
        return self.t // self.n

    @property
    def uav(self) -> int:
        return self.t % self.n

    def state(self) -> EnvState:
        i = self.uav if not self.done else self.n - 1
        j = min(self.layer, self.n_layers - 1)
        return EnvState(
            layer=j,
            uav=i,
            memory_left=float(self.mem_left[i]),
            compute_left=float(self.comp_left[i]),
            memory_cap=float(self.mem_cap[i]),
            compute_cap=float(self.comp_cap[i]),
            n_layers=self.n_layers,
            n_uavs=self.n,
            positions=tuple(int(q) for q in self.positions),
            hot_cells=self.hot,
            cell_count=self.cells,
        )

    def observe(self) -> np.ndarray:
        return encode_state(self.state())

    def forced_cell(self) -> int | None:
        """Cell the current UAV must move to under a static schedule."""
        schedule = self.config.static_schedule
        if schedule is None or self.done:
            return None
        return int(schedule[self.layer % len(schedule)][self.uav])

    def _allocation_latency(self, j: int, i: int) -> float:
        placement = self.positions
        if j == 0:
            sender, payload = self.source, self.network.input_bytes
        else:
            sender, payload = self.assignment[j - 1], self.network.output_bytes[j - 1]
        transfer = 0.0
        if sender is not None and sender != i:
            rate = self.links.rate(int(placement[sender]), int(placement[i]))
            transfer = payload * 8 / rate
        return transfer + self.layer_comp[j] / self.speed[i]

    def step(self, a1: int, a2: int):
        """Apply one action; returns ``(obs, reward, done, info)``."""
        if self.done:
            raise ContractViolation("step() called on a finished episode; call reset()")
        a1, a2 = int(a1), int(a2)
        if a1 not in (0, 1):
            raise ContractViolation(f"a1 must be 0 or 1, got {a1}")
        if not 0 <= a2 < self.cells:
            raise ContractViolation(f"a2 must be a cell index below {self.cells}, got {a2}")
        forced = self.forced_cell()
        if forced is not None:
            a2 = forced

        j, i = self.layer, self.uav
        if i == 0:
            self.visited = set()
            self.window_allocs = []

        here = int(self.positions[i])
        others = set(int(q) for k, q in enumerate(self.positions) if k != i)
        cons2 = check_cons2(self.visited, a2, others)
        if cons2 and self.setup.grid.adjacent_moves_only and not are_adjacent(here, a2, self.setup.grid):
            cons2 = False
        if cons2:
            self.positions[i] = a2
            self.visited.add(a2)

        cons3 = check_cons3(self.layer_mem[j], self.layer_comp[j], self.mem_left[i], self.comp_left[i], bool(a1))
        effective = int(a1 == 1 and cons3)
        already = sum(self.window_allocs)
        self.window_allocs.append(effective)
        cons1 = check_cons1(self.window_allocs, self.n)

        penalty = 0.0
        allocated = False
        if effective and already == 0:
            penalty = self._allocation_latency(j, i)
            self.assignment[j] = i
            self.snapshots[j] = tuple(int(q) for q in self.positions)
            self.mem_left[i] -= self.layer_mem[j]
            self.comp_left[i] -= self.layer_comp[j]
            allocated = True

        cell = int(self.positions[i])
        in_hot = cell in self._hot_set
        qos = 0.0
        if in_hot:
            self.demand[cell] = max(0.0, self.demand[cell] - 1.0)
            qos = qos_reward(self.config.qos_factor, list(self.demand.values()))

        ok = cons1 and cons2 and cons3
        reward = float(ok) - self.config.penalty_scale * penalty + qos
        if self.hot:
            occupied = set(int(q) for q in self.positions)
            coverage = sum(1 for q in self.hot if q in occupied) / len(self.hot)
        else:
            coverage = 1.0

        if i == self.n - 1 and self.snapshots[j] is None:
            self.snapshots[j] = tuple(int(q) for q in self.positions)

        self.episode_reward += reward
        self.episode_penalty += penalty
        self.steps_ok += int(ok)
        self.coverage_sum += coverage
        self.t += 1
        self.done = self.t >= self.episode_length

        info = {
            "layer": j,
            "uav": i,
            "a1": a1,
            "a2": a2,
            "cons1": cons1,
            "cons2": cons2,
            "cons3": cons3,
            "allocated": allocated,
            "penalty": penalty,
            "qos": qos,
            "coverage": coverage,
            "reward": reward,
        }
        obs = np.zeros(self.state_size) if self.done else self.observe()
        return obs, reward, self.done, info

    # -- episode summaries -------------------------------------------------

    def plan(self, request_id: int = 0) -> AllocationPlan:
        placements = []
        last = tuple(int(q) for q in self.positions)
        for snap in self.snapshots:
            placements.append(snap if snap is not None else last)
        return AllocationPlan(self.source, tuple(self.assignment), tuple(placements), request_id)

    def episode_summary(self) -> dict:
        steps = max(self.t, 1)
        served = sum(1 for q in self.hot if self.demand[q] < self.config.initial_demand)
        return {
            "reward": self.episode_reward,
            "penalty": self.episode_penalty,
            "accuracy": self.steps_ok / steps,
            "feasible": self.steps_ok == self.t and self.t == self.episode_length,
            "coverage": self.coverage_sum / steps,
            "demand_served": served / len(self.hot) if self.hot else 1.0,
            "complete": all(u is not None for u in self.assignment),
            "steps": self.t,
        }
