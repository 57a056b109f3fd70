"""Non-learning solvers for the joint allocation and placement problem.

All solvers assume free movement: a UAV may reach any cell between two
layer placements. Under that assumption a plan's latency separates over
layer steps, because the placement used for step ``j`` only affects the
transfer into layer ``j``. The exact placement for a step therefore only
has to seat the sending and receiving UAV as close as possible while
the remaining UAVs still cover every hot cell.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractViolation, InfeasiblePlanError
from .latency_model import AllocationPlan, LatencyBreakdown, SwarmSetup, total_latency
from .radio_grid import Placement, placement_violations

ORACLE_CAPS = {"uavs": 3, "layers": 4, "cells": 9}


@dataclass(frozen=True)
class InstanceSpec:
    """One request on a fixed swarm: who captured the image and where everyone starts."""

    setup: SwarmSetup
    source: int
    initial: Placement

    def __post_init__(self):
        object.__setattr__(self, "initial", tuple(int(q) for q in self.initial))
        n, c = self.setup.n_uavs, self.setup.grid.cell_count
        if n > c:
            raise ConfigError(f"{n} UAVs do not fit in {c} cells")
        if n < len(self.hot_cells):
            raise ConfigError("the swarm must have at least as many UAVs as hot cells")
        if not 0 <= self.source < n:
            raise ConfigError(f"source UAV {self.source} not in swarm of {n}")
        if len(self.initial) != n:
            raise ConfigError("initial placement must list every UAV")
        bad = placement_violations(self.initial, self.setup.grid, self.hot_cells)
        if bad:
            raise ConfigError(f"initial placement violates {', '.join(bad)}")

    @property
    def hot_cells(self) -> tuple[int, ...]:
        return self.setup.grid.hot_cells

    @property
    def n_uavs(self) -> int:
        return self.setup.n_uavs

    @property
    def n_layers(self) -> int:
        return self.setup.n_layers


@dataclass
class SolverResult:
    name: str
    plan: AllocationPlan
    latency: LatencyBreakdown
    extras: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.latency.total

    def as_row(self) -> dict:
        row = {"solver": self.name, "assignment": " ".join(str(u) for u in self.plan.assignment)}
        row.update(self.latency.as_row())
        return row


def _free_movement_only(instance: InstanceSpec) -> None:
    if instance.setup.grid.adjacent_moves_only:
        raise ConfigError("the non-learning solvers assume free movement between steps")


def _budgets(setup: SwarmSetup) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array([u.memory for u in setup.swarm], dtype=float),
        np.array([u.compute for u in setup.swarm], dtype=float),
    )


def resources_fit(assignment: Sequence[int], setup: SwarmSetup) -> tuple[bool, bool]:
    """(memory fits, compute fits) for a full layer assignment."""
    mem_cap, comp_cap = _budgets(setup)
    mem = np.zeros(setup.n_uavs)
    comp = np.zeros(setup.n_uavs)
    for j, u in enumerate(assignment):
        mem[u] += setup.network.memory[j]
        comp[u] += setup.network.compute[j]
    return bool(np.all(mem <= mem_cap)), bool(np.all(comp <= comp_cap))


def _infeasible(setup: SwarmSetup, mem_ok_any: bool, comp_ok_any: bool) -> InfeasiblePlanError:
    if not mem_ok_any and not comp_ok_any:
        tags = ["8a", "8b"]
    elif not mem_ok_any:
        tags = ["8a"]
    elif not comp_ok_any:
        tags = ["8b"]
    else:
        tags = ["8a", "8b"]
    return InfeasiblePlanError(tags, f"no layer assignment fits the budgets (binding: {', '.join(tags)})")


def fill_placement(n_uavs: int, fixed: dict[int, int], grid, hot_cells: Sequence[int]) -> Placement | None:
    """Complete a placement where ``fixed`` pins some UAVs to cells.

    Free UAVs (in index order) take the uncovered hot cells first, then the
    lowest free cells. Returns ``None`` when the hot cells cannot be covered.
    """
    taken = set(fixed.values())
    if len(taken) != len(fixed):
        return None
    free_uavs = [i for i in range(n_uavs) if i not in fixed]
    todo = [q for q in sorted(hot_cells) if q not in taken]
    if len(todo) > len(free_uavs):
        return None
    spare = (q for q in range(grid.cell_count) if q not in taken and q not in todo)
    out = dict(fixed)
    for i in free_uavs:
        out[i] = todo.pop(0) if todo else next(spare)
    return tuple(out[i] for i in range(n_uavs))


def best_step_placement(instance: InstanceSpec, sender: int | None, receiver: int) -> Placement:
    """Collision-free, hot-cell-covering placement with the fastest sender-receiver link.

    With no transfer this step (same UAV, or no sender) the initial
    placement is kept. Ties between equally fast cell pairs go to the
    lexicographically smallest pair.
    """
    if sender is None or sender == receiver:
        return instance.initial
    grid, links = instance.setup.grid, instance.setup.links
    hot = set(instance.hot_cells)
    n = instance.n_uavs
    best, best_rate = None, -1.0
    for a in range(grid.cell_count):
        for b in range(grid.cell_count):
            if a == b or len(hot - {a, b}) > n - 2:
                continue
            r = links.rate(a, b)
            if r > best_rate:
                best, best_rate = (a, b), r
    if best is None:
        raise InfeasiblePlanError(["8h"], "no placement seats two UAVs apart while covering the hot cells")
    placement = fill_placement(n, {sender: best[0], receiver: best[1]}, grid, instance.hot_cells)
    assert placement is not None
    return placement


def best_placements(instance: InstanceSpec, assignment: Sequence[int]) -> tuple[Placement, ...]:
    out = []
    for j, u in enumerate(assignment):
        sender = instance.source if j == 0 else assignment[j - 1]
        out.append(best_step_placement(instance, sender, u))
    return tuple(out)


def _plan(instance: InstanceSpec, assignment, placements) -> AllocationPlan:
    return AllocationPlan(instance.source, tuple(int(u) for u in assignment), tuple(placements))


def _evaluate(instance: InstanceSpec, assignment, placements) -> tuple[AllocationPlan, LatencyBreakdown]:
    plan = _plan(instance, assignment, placements)
    return plan, total_latency(plan, instance.setup)


def check_oracle_caps(instance: InstanceSpec, caps: dict | None = None) -> None:
    caps = {**ORACLE_CAPS, **(caps or {})}
    if instance.n_uavs > caps["uavs"] or instance.n_layers > caps["layers"] or instance.setup.grid.cell_count > caps["cells"]:
        raise ContractViolation(
            f"instance (N={instance.n_uavs}, L={instance.n_layers}, C={instance.setup.grid.cell_count}) "
            f"exceeds the oracle caps {caps}"
        )


def exhaustive_oracle(instance: InstanceSpec, caps: dict | None = None) -> SolverResult:
    """Minimum-latency plan by enumerating every layer assignment.

    Assignments are visited in lexicographic order and only a strictly
    better latency replaces the incumbent. Each assignment is paired with
    its exact per-step placements.
    """
    check_oracle_caps(instance, caps)
    _free_movement_only(instance)
    setup = instance.setup
    best = None
    mem_any = comp_any = False
    visited = 0
    for assignment in itertools.product(range(instance.n_uavs), repeat=instance.n_layers):
        mem_ok, comp_ok = resources_fit(assignment, setup)
        mem_any |= mem_ok
        comp_any |= comp_ok
        if not (mem_ok and comp_ok):
            continue
        visited += 1
        plan, lat = _evaluate(instance, assignment, best_placements(instance, assignment))
        if best is None or lat.total < best[1].total:
            best = (plan, lat)
    if best is None:
        raise _infeasible(setup, mem_any, comp_any)
    return SolverResult("oracle", best[0], best[1], {"feasible_assignments": visited})


def _step_costs(instance: InstanceSpec, placements: Sequence[Placement]):
    """cost[j][prev][u]: latency added by running layer j on u after prev (prev=None -> source)."""
    setup = instance.setup
    net = setup.network
    n = instance.n_uavs
    links = setup.links

    def transfer(j, sender, u):
        if sender == u:
            return 0.0
        payload = net.input_bytes if j == 0 else net.output_bytes[j - 1]
        p = placements[j]
        return payload * 8 / links.rate(p[sender], p[u])

    compute = [[net.compute[j] / setup.swarm[u].speed for u in range(n)] for j in range(len(net))]
    first = [transfer(0, instance.source, u) + compute[0][u] for u in range(n)]
    later = [
        [[transfer(j, v, u) + compute[j][u] for u in range(n)] for v in range(n)]
        for j in range(1, len(net))
    ]
    return first, later


def best_assignment(instance: InstanceSpec, placements: Sequence[Placement]) -> tuple[int, ...] | None:
    """Exact best layer assignment for fixed per-step placements (depth-first, bound-pruned)."""
    setup = instance.setup
    net = setup.network
    n, n_layers = instance.n_uavs, instance.n_layers
    first, later = _step_costs(instance, placements)
    mem_cap, comp_cap = _budgets(setup)
    fastest = float(setup.speeds.max())
    tail = np.concatenate([np.cumsum(np.array(net.compute[::-1], dtype=float))[::-1], [0.0]]) / fastest

    best_cost = math.inf
    best: tuple[int, ...] | None = None
    mem = np.zeros(n)
    comp = np.zeros(n)
    chosen: list[int] = []

    def dfs(j: int, cost: float) -> None:
        nonlocal best_cost, best
        if cost + tail[j] >= best_cost:
            return
        if j == n_layers:
            best_cost, best = cost, tuple(chosen)
            return
        for u in range(n):
            if mem[u] + net.memory[j] > mem_cap[u] or comp[u] + net.compute[j] > comp_cap[u]:
                continue
            step = first[u] if j == 0 else later[j - 1][chosen[-1]][u]
            mem[u] += net.memory[j]
            comp[u] += net.compute[j]
            chosen.append(u)
            dfs(j + 1, cost + step)
            chosen.pop()
            mem[u] -= net.memory[j]
            comp[u] -= net.compute[j]

    dfs(0, 0.0)
    return best


def random_placement(instance: InstanceSpec, rng: np.random.Generator) -> Placement:
    """Uniform draw over collision-free placements that cover the hot cells.

    A random subset of UAVs takes the hot cells in random order and the
    rest take distinct random cold cells; every valid placement arises in
    exactly one way, so the draw is uniform.
    """
    grid, hot = instance.setup.grid, list(instance.hot_cells)
    n = instance.n_uavs
    cold = [q for q in range(grid.cell_count) if q not in hot]
    if n > grid.cell_count or n < len(hot):
        raise InfeasiblePlanError(["8h"], "no placement covers the hot cells")
    order = rng.permutation(n)
    out = [0] * n
    for i, q in zip(order[: len(hot)], rng.permutation(hot)):
        out[i] = int(q)
    for i, q in zip(order[len(hot) :], rng.choice(cold, size=n - len(hot), replace=False)):
        out[i] = int(q)
    return tuple(out)


def alternating_suboptimal(
    instance: InstanceSpec,
    rounds: int = 10,
    restarts: int = 4,
    seed: int = 0,
    initial_paths: Sequence[Placement] | None = None,
) -> SolverResult:
    """Alternate exact assignment (placements fixed) and exact placements (assignment fixed).

    Starts are the supplied ``initial_paths`` or the static initial
    placement, followed by ``restarts`` random placement schedules. Each
    start runs until a round brings no improvement or ``rounds`` is hit;
    the per-round latencies of the winning start are kept in
    ``extras["history"]``.
    """
    _free_movement_only(instance)
    if rounds < 1:
        raise ConfigError("rounds must be >= 1")
    rng = np.random.default_rng(seed)
    n_layers = instance.n_layers
    starts = [tuple(initial_paths) if initial_paths is not None else (instance.initial,) * n_layers]
    for _ in range(restarts):
        starts.append(tuple(random_placement(instance, rng) for _ in range(n_layers)))

    best = None
    for k, paths in enumerate(starts):
        history = []
        assignment = None
        current = None
        for _ in range(rounds):
            cand = best_assignment(instance, paths)
            if cand is None:
                break
            plan, lat = _evaluate(instance, cand, paths)
            improved = current is None or lat.total < current[1].total
            if improved:
                current = (plan, lat)
            history.append(current[1].total)
            assignment = current[0].assignment
            new_paths = best_placements(instance, assignment)
            plan2, lat2 = _evaluate(instance, assignment, new_paths)
            if lat2.total < current[1].total:
                current = (plan2, lat2)
                history[-1] = lat2.total
                paths = new_paths
            elif not improved:
                break
            else:
                paths = new_paths
        if current is not None and (best is None or current[1].total < best[1].total):
            best = (current[0], current[1], history, k)
    if best is None:
        mem_any, comp_any = _any_fit(instance.setup)
        raise _infeasible(instance.setup, mem_any, comp_any)
    return SolverResult("alternating", best[0], best[1], {"history": best[2], "start": best[3]})


def _any_fit(setup: SwarmSetup) -> tuple[bool, bool]:
    """Whether memory (resp. compute) alone admits any assignment; cheap per-layer check."""
    mem_cap, comp_cap = _budgets(setup)
    mem_ok = all(m <= mem_cap.max() for m in setup.network.memory) and sum(setup.network.memory) <= mem_cap.sum()
    comp_ok = all(c <= comp_cap.max() for c in setup.network.compute) and sum(setup.network.compute) <= comp_cap.sum()
    return mem_ok, comp_ok


def greedy_heuristic(instance: InstanceSpec) -> SolverResult:
    """Layer by layer, take the cheapest UAV that still has room; UAVs hold their initial cells."""
    setup = instance.setup
    net = setup.network
    n = instance.n_uavs
    paths = (instance.initial,) * instance.n_layers
    first, later = _step_costs(instance, paths)
    mem_cap, comp_cap = _budgets(setup)
    mem = np.zeros(n)
    comp = np.zeros(n)
    assignment: list[int] = []
    for j in range(instance.n_layers):
        costs = first if j == 0 else later[j - 1][assignment[-1]]
        options = [u for u in range(n) if mem[u] + net.memory[j] <= mem_cap[u] and comp[u] + net.compute[j] <= comp_cap[u]]
        if not options:
            mem_short = all(mem[u] + net.memory[j] > mem_cap[u] for u in range(n))
            comp_short = all(comp[u] + net.compute[j] > comp_cap[u] for u in range(n))
            tags = [t for t, short in (("8a", mem_short), ("8b", comp_short)) if short] or ["8a", "8b"]
            raise InfeasiblePlanError(tags, f"greedy dead end at layer {j} (binding: {', '.join(tags)})")
        u = min(options, key=lambda v: (costs[v], v))
        assignment.append(u)
        mem[u] += net.memory[j]
        comp[u] += net.compute[j]
    plan, lat = _evaluate(instance, assignment, paths)
    return SolverResult("greedy", plan, lat)


def random_policy(instance: InstanceSpec, trials: int = 100, seed: int = 0, max_tries: int = 10_000) -> SolverResult:
    """Random feasible assignments with random valid placements; latency mean/std over ``trials``.

    The returned plan is the first trial's; ``extras`` holds every trial's
    latency plus mean and standard deviation.
    """
    _free_movement_only(instance)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    totals = []
    first = None
    for _ in range(trials):
        for _ in range(max_tries):
            assignment = tuple(int(u) for u in rng.integers(instance.n_uavs, size=instance.n_layers))
            if all(resources_fit(assignment, instance.setup)):
                break
        else:
            raise _infeasible(instance.setup, *_any_fit(instance.setup))
        paths = tuple(random_placement(instance, rng) for _ in range(instance.n_layers))
        plan, lat = _evaluate(instance, assignment, paths)
        totals.append(lat.total)
        if first is None:
            first = (plan, lat)
    arr = np.array(totals)
    return SolverResult(
        "random", first[0], first[1], {"latencies": totals, "mean": float(arr.mean()), "std": float(arr.std())}
    )


def static_path_mode(env_config, schedule: Sequence[Placement], train_config, total_steps: int, seed: int = 0, events=()):
    """Train the allocation head only; UAV movement follows ``schedule``.

    The schedule is validated (in-grid, collision-free, including while
    UAVs move one at a time) before any training starts.
    """
    from dataclasses import replace

    from .ppo import train
    from .swarm_mdp import SwarmEnv

    config = replace(env_config, static_schedule=tuple(tuple(p) for p in schedule))
    return train(lambda s: SwarmEnv(config, s), train_config, total_steps, seed=seed, events=events)


def random_instance(
    rng: np.random.Generator,
    max_uavs: int = 3,
    max_layers: int = 4,
    sides: Sequence[int] = (2, 3),
    speeds: Sequence[float] = (256e6, 512e6, 560e6),
    networks: Sequence[str] = ("LeNet", "AlexNet", "VGG16"),
) -> InstanceSpec:
    """Draw a small instance on which greedy has a feasible path.

    The network is a run of consecutive layers cut from a catalog CNN; the
    payload entering the first kept layer plays the role of the source
    image. Each UAV gets 40-120% of the slice's total memory and compute
    (never less than its largest layer).
    """
    from .cnn_catalog import NetworkSpec, build_network
    from .latency_model import UavSpec
    from .radio_grid import GridConfig

    while True:
        side = int(rng.choice(sides))
        cells = side * side
        n = int(rng.integers(1, min(max_uavs, cells) + 1))
        n_hot = int(rng.integers(0, n + 1))
        hot = tuple(sorted(int(q) for q in rng.choice(cells, size=n_hot, replace=False)))
        base = build_network(str(rng.choice(list(networks))))
        n_layers = int(rng.integers(1, min(max_layers, len(base)) + 1))
        start = int(rng.integers(0, len(base) - n_layers + 1))
        payload = base.input_bytes if start == 0 else base.output_bytes[start - 1]
        net = NetworkSpec(f"{base.name}[{start}:{start + n_layers}]", base.layers[start : start + n_layers], payload, base.class_count)
        total_m, total_c = sum(net.memory), sum(net.compute)
        swarm = tuple(
            UavSpec(
                float(rng.choice(speeds)),
                max(max(net.memory), float(rng.uniform(0.4, 1.2)) * total_m),
                max(max(net.compute), float(rng.uniform(0.4, 1.2)) * total_c),
            )
            for _ in range(n)
        )
        setup = SwarmSetup(net, swarm, GridConfig(side=side, hot_cells=hot))
        free = [q for q in range(cells) if q not in hot]
        start_cells = list(hot) + [int(q) for q in rng.choice(free, size=n - n_hot, replace=False)]
        rng.shuffle(start_cells)
        instance = InstanceSpec(setup, int(rng.integers(n)), tuple(start_cells))
        try:
            greedy_heuristic(instance)
        except InfeasiblePlanError:
            continue
        return instance
