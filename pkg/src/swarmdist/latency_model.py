"""End-to-end latency of a distributed inference request.

A request's latency has three parts: shipping the captured image from the
source UAV to whoever runs the first layer, the compute time on every UAV
that runs layers, and shipping intermediate activations whenever two
consecutive layers live on different UAVs. Payloads are held in bytes and
converted to bits when divided by a link rate.

Time indexing: ``plan.placements[j]`` is the swarm layout at the moment
layer ``j`` is placed. The source transfer uses ``placements[0]`` and the
hop feeding layer ``j`` uses ``placements[j]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .cnn_catalog import NetworkSpec
from .errors import ConfigError, ContractViolation, InfeasibleLinkError, InfeasiblePlanError
from .radio_grid import GridConfig, LinkTable, Placement, RadioParams, placement_violations

CONSTRAINT_TAGS = ("8a", "8b", "8c", "8d", "8e", "8f", "8g", "8h")


@dataclass(frozen=True)
class UavSpec:
    """One UAV: processing speed (mult/s), memory budget (bytes), compute budget (mults)."""

    speed: float
    memory: float
    compute: float

    def __post_init__(self):
        if not (self.speed > 0 and self.memory >= 0 and self.compute >= 0):
            raise ConfigError(f"invalid UAV spec {self}")


@dataclass(frozen=True)
class SwarmSetup:
    """Everything fixed about a scenario apart from the request itself."""

    network: NetworkSpec
    swarm: tuple[UavSpec, ...]
    grid: GridConfig = field(default_factory=GridConfig)
    radio: RadioParams = field(default_factory=RadioParams)

    def __post_init__(self):
        object.__setattr__(self, "swarm", tuple(self.swarm))
        if not self.swarm:
            raise ConfigError("the swarm needs at least one UAV")

    @property
    def n_uavs(self) -> int:
        return len(self.swarm)

    @property
    def n_layers(self) -> int:
        return len(self.network)

    @cached_property
    def links(self) -> LinkTable:
        return LinkTable(self.grid, self.radio)

    @cached_property
    def speeds(self) -> np.ndarray:
        return np.array([u.speed for u in self.swarm], dtype=float)

    def with_swarm(self, swarm: Sequence[UavSpec]) -> "SwarmSetup":
        return SwarmSetup(self.network, tuple(swarm), self.grid, self.radio)


@dataclass(frozen=True)
class AllocationPlan:
    """Layer-to-UAV mapping for one request plus the swarm layout per layer.

    ``assignment[j]`` is the UAV running layer ``j`` (``None`` if the layer
    was never placed).
    """

    source: int
    assignment: tuple[int | None, ...]
    placements: tuple[Placement, ...]
    request_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(self.assignment))
        object.__setattr__(self, "placements", tuple(tuple(p) for p in self.placements))

    @property
    def complete(self) -> bool:
        return all(u is not None for u in self.assignment)


@dataclass(frozen=True)
class LatencyBreakdown:
    source_transfer: float
    compute: tuple[float, ...]
    hops: tuple[float, ...]
    total: float
    shared_bytes: int

    def as_row(self) -> dict:
        return {
            "source_transfer": self.source_transfer,
            "compute": sum(self.compute),
            "transfer": sum(self.hops),
            "total": self.total,
            "shared_bytes": self.shared_bytes,
        }


def _transfer_seconds(payload_bytes: int, rate: float) -> float:
    if not rate > 0:
        raise InfeasibleLinkError(f"zero data rate for a {payload_bytes}-byte transfer")
    return payload_bytes * 8 / rate


def source_transfer_latency(plan: AllocationPlan, setup: SwarmSetup) -> float:
    first = plan.assignment[0]
    if first is None:
        raise ContractViolation("layer 1 has no UAV")
    if first == plan.source:
        return 0.0
    rate = setup.links.uav_rate(plan.placements[0], plan.source, first)
    return _transfer_seconds(setup.network.input_bytes, rate)


def compute_latency(plan: AllocationPlan, uav: int, setup: SwarmSetup) -> float:
    speed = setup.swarm[uav].speed
    if speed <= 0:
        raise ContractViolation(f"UAV {uav} has non-positive speed")
    load = sum(c for c, u in zip(setup.network.compute, plan.assignment) if u == uav)
    return load / speed


def hop_transfer_latency(plan: AllocationPlan, layer: int, setup: SwarmSetup) -> float:
    """Seconds to move layer ``layer``'s output to the UAV running ``layer + 1``."""
    if not 0 <= layer < setup.n_layers - 1:
        raise ContractViolation(f"no hop after layer {layer}")
    sender, receiver = plan.assignment[layer], plan.assignment[layer + 1]
    if sender is None or receiver is None:
        raise ContractViolation(f"layers {layer} and {layer + 1} must both be assigned")
    if sender == receiver:
        return 0.0
    rate = setup.links.uav_rate(plan.placements[layer + 1], sender, receiver)
    return _transfer_seconds(setup.network.output_bytes[layer], rate)


def resource_usage(plan: AllocationPlan, setup: SwarmSetup) -> tuple[np.ndarray, np.ndarray]:
    mem = np.zeros(setup.n_uavs)
    comp = np.zeros(setup.n_uavs)
    for j, u in enumerate(plan.assignment):
        if u is not None and 0 <= u < setup.n_uavs:
            mem[u] += setup.network.memory[j]
            comp[u] += setup.network.compute[j]
    return mem, comp


def validate_plan(
    plan: AllocationPlan,
    setup: SwarmSetup,
    hot_cells: Sequence[int] | None = None,
    consumed: tuple[Sequence[float], Sequence[float]] | None = None,
) -> list[str]:
    """Return the sorted constraint tags the plan breaks (empty when feasible).

    ``hot_cells`` defaults to the grid's hot cells; pass ``()`` to skip the
    hot-cell coverage constraint. ``consumed`` is memory/compute already
    used earlier in the same frame.
    """
    hot = setup.grid.hot_cells if hot_cells is None else tuple(hot_cells)
    n, n_layers = setup.n_uavs, setup.n_layers
    bad = set()

    if not 0 <= plan.source < n:
        bad.add("8c")
    if len(plan.assignment) != n_layers:
        bad.add("8c")
    for u in plan.assignment:
        if u is None:
            bad.add("8c")
        elif not isinstance(u, (int, np.integer)) or not 0 <= u < n:
            bad.add("8d")

    if len(plan.placements) != n_layers:
        bad.add("8f")
    for p in plan.placements:
        if len(p) != n:
            bad.add("8f")
            continue
        if any(not isinstance(q, (int, np.integer)) for q in p):
            bad.add("8e")
            continue
        bad.update(placement_violations(p, setup.grid, hot))

    mem, comp = resource_usage(plan, setup)
    if consumed is not None:
        mem = mem + np.asarray(consumed[0], dtype=float)
        comp = comp + np.asarray(consumed[1], dtype=float)
    caps_m = np.array([u.memory for u in setup.swarm])
    caps_c = np.array([u.compute for u in setup.swarm])
    if np.any(mem > caps_m):
        bad.add("8a")
    if np.any(comp > caps_c):
        bad.add("8b")
    return sorted(bad)


def check_plan(plan: AllocationPlan, setup: SwarmSetup, hot_cells=None, consumed=None) -> None:
    bad = validate_plan(plan, setup, hot_cells, consumed)
    if bad:
        raise InfeasiblePlanError(bad)


def total_latency(
    plan: AllocationPlan,
    setup: SwarmSetup,
    hot_cells: Sequence[int] | None = None,
    consumed=None,
    validate: bool = True,
) -> LatencyBreakdown:
    """Validate ``plan`` then sum its source, compute and hop latencies."""
    if validate:
        check_plan(plan, setup, hot_cells, consumed)
    net = setup.network
    t_s = source_transfer_latency(plan, setup)
    shared = net.input_bytes if plan.assignment[0] != plan.source else 0
    compute = tuple(compute_latency(plan, i, setup) for i in range(setup.n_uavs))
    hops = []
    for j in range(setup.n_layers - 1):
        hops.append(hop_transfer_latency(plan, j, setup))
        if plan.assignment[j] != plan.assignment[j + 1]:
            shared += net.output_bytes[j]
    total = t_s + sum(compute) + sum(hops)
    return LatencyBreakdown(t_s, compute, tuple(hops), total, shared)


def compute_lower_bound(setup: SwarmSetup) -> float:
    return setup.network.total_compute / float(setup.speeds.max())
