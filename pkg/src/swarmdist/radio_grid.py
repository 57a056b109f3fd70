"""Surveillance grid geometry and the UAV-to-UAV link model.

Cells are numbered row-major from the top-left corner. UAVs fly at a
common altitude, so the link distance is the planar distance between the
centres of the two occupied cells and altitude is absorbed into the
reference gain ``h0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractViolation, InfeasiblePlacementError

Placement = tuple[int, ...]


@dataclass(frozen=True)
class GridConfig:
    side: int = 5
    cell_size: float = 20.0
    hot_cells: tuple[int, ...] = (6, 12, 18)
    adjacent_moves_only: bool = False

    def __post_init__(self):
        if self.side < 1 or self.cell_size <= 0:
            raise ConfigError("grid side and cell_size must be positive")
        hot = tuple(sorted(set(int(c) for c in self.hot_cells)))
        if len(hot) != len(self.hot_cells):
            raise ConfigError("hot cells must be distinct")
        if any(c < 0 or c >= self.cell_count for c in hot):
            raise ConfigError(f"hot cells must lie in 0..{self.cell_count - 1}")
        object.__setattr__(self, "hot_cells", hot)

    @property
    def cell_count(self) -> int:
        return self.side * self.side

    @property
    def extent(self) -> float:
        return self.side * self.cell_size


@dataclass(frozen=True)
class RadioParams:
    h0: float = 1e-3
    power: float = 0.1
    noise: float = 7.9e-9
    bandwidth: float = 1e3

    def __post_init__(self):
        for name in ("h0", "power", "noise", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"radio parameter {name} must be positive")


def cell_center(cell: int, grid: GridConfig) -> tuple[float, float]:
    if not 0 <= cell < grid.cell_count:
        raise ContractViolation(f"cell {cell} outside 0..{grid.cell_count - 1}")
    row, col = divmod(cell, grid.side)
    return ((col + 0.5) * grid.cell_size, (row + 0.5) * grid.cell_size)


def distance(cell_a: int, cell_b: int, grid: GridConfig) -> float:
    xa, ya = cell_center(cell_a, grid)
    xb, yb = cell_center(cell_b, grid)
    return math.hypot(xa - xb, ya - yb)


def are_adjacent(cell_a: int, cell_b: int, grid: GridConfig) -> bool:
    """True when the cells are equal or touch (8-neighbourhood)."""
    ra, ca = divmod(cell_a, grid.side)
    rb, cb = divmod(cell_b, grid.side)
    return abs(ra - rb) <= 1 and abs(ca - cb) <= 1


def placement_violations(placement: Sequence[int], grid: GridConfig, hot_cells: Sequence[int] = ()) -> list[str]:
    """Constraint tags broken by a one-cell-per-UAV placement.

    "8e"/"8f": a UAV sits outside the grid, "8g": two UAVs share a cell,
    "8h": a required hot cell is empty.
    """
    out = []
    if any(not 0 <= q < grid.cell_count for q in placement):
        out.append("8f")
    if len(set(placement)) != len(placement):
        out.append("8g")
    occupied = set(placement)
    if any(q not in occupied for q in hot_cells):
        out.append("8h")
    return out


def validate_placement(placement: Sequence[int], grid: GridConfig, hot_cells: Sequence[int] = ()) -> Placement:
    bad = placement_violations(placement, grid, hot_cells)
    if bad:
        raise InfeasiblePlacementError(f"placement {tuple(placement)} violates {', '.join(bad)}")
    return tuple(int(q) for q in placement)


def channel_gain(placement: Sequence[int], i: int, k: int, radio: RadioParams, grid: GridConfig) -> float:
    """Free-space gain between UAVs ``i`` and ``k`` (inverse-square in distance)."""
    if i == k:
        raise ContractViolation("channel gain needs two distinct UAVs")
    qi, qk = placement[i], placement[k]
    if qi == qk:
        raise InfeasiblePlacementError(f"UAVs {i} and {k} share cell {qi}")
    d = distance(qi, qk, grid)
    return radio.h0 / d**2


def rate_from_gain(gain: float, radio: RadioParams) -> float:
    return radio.bandwidth * math.log2(1.0 + gain * radio.power / radio.noise)


def data_rate(placement: Sequence[int], i: int, k: int, radio: RadioParams, grid: GridConfig) -> float:
    """Achievable rate from ``i`` to ``k`` in bit/s."""
    return rate_from_gain(channel_gain(placement, i, k, radio, grid), radio)


@dataclass(frozen=True)
class LinkTable:
    """Precomputed rate between every ordered pair of distinct cells.

    Solvers and the environment query thousands of links; this caches the
    C x C matrix once per (grid, radio). Diagonal entries are ``inf``
    because a co-located pair never transmits.
    """

    grid: GridConfig
    radio: RadioParams
    rates: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.rates is None:
            n = self.grid.cell_count
            rates = np.full((n, n), np.inf)
            for a in range(n):
                for b in range(n):
                    if a != b:
                        gain = self.radio.h0 / distance(a, b, self.grid) ** 2
                        rates[a, b] = rate_from_gain(gain, self.radio)
            rates.setflags(write=False)
            object.__setattr__(self, "rates", rates)

    def rate(self, cell_a: int, cell_b: int) -> float:
        if cell_a == cell_b:
            raise InfeasiblePlacementError(f"two UAVs share cell {cell_a}")
        return float(self.rates[cell_a, cell_b])

    def uav_rate(self, placement: Sequence[int], i: int, k: int) -> float:
        if i == k:
            raise ContractViolation("a link needs two distinct UAVs")
        return self.rate(placement[i], placement[k])
