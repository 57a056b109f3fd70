import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmdist.errors import ConfigError, ContractViolation, InfeasiblePlacementError
from swarmdist.radio_grid import (
    GridConfig,
    LinkTable,
    RadioParams,
    are_adjacent,
    cell_center,
    channel_gain,
    data_rate,
    distance,
    placement_violations,
    rate_from_gain,
    validate_placement,
)

GRID = GridConfig()
RADIO = RadioParams()


def test_gain_at_20m():
    # neighbouring cells are one cell size (20 m) apart
    assert channel_gain((0, 1), 0, 1, RADIO, GRID) == pytest.approx(2.5e-6, rel=1e-12)


def test_rate_at_20m():
    expected = 1000 * math.log2(1 + 2.5e-6 * 0.1 / 7.9e-9)
    rate = data_rate((0, 1), 0, 1, RADIO, GRID)
    assert rate == pytest.approx(expected, rel=1e-12)
    assert abs(rate - 5029) <= 1


def test_inverse_square():
    near = channel_gain((0, 1), 0, 1, RADIO, GRID)
    far = channel_gain((0, 2), 0, 1, RADIO, GRID)
    assert abs(near / far - 4.0) <= 1e-12


def test_cell_centres_row_major():
    assert cell_center(0, GRID) == (10.0, 10.0)
    assert cell_center(7, GRID) == (50.0, 30.0)
    with pytest.raises(ContractViolation):
        cell_center(25, GRID)


def test_same_uav_rejected():
    with pytest.raises(ContractViolation):
        channel_gain((0, 1), 0, 0, RADIO, GRID)


def test_colocated_rejected():
    with pytest.raises(InfeasiblePlacementError):
        channel_gain((3, 3), 0, 1, RADIO, GRID)


def test_placement_tags():
    assert placement_violations((0, 1, 2), GRID) == []
    assert placement_violations((0, 25), GRID) == ["8f"]
    assert placement_violations((4, 4), GRID) == ["8g"]
    assert placement_violations((0, 1, 2), GRID, (6, 12, 18)) == ["8h"]
    with pytest.raises(InfeasiblePlacementError):
        validate_placement((4, 4), GRID)


def test_bad_grid():
    with pytest.raises(ConfigError):
        GridConfig(side=2, hot_cells=(7,))
    with pytest.raises(ConfigError):
        GridConfig(hot_cells=(3, 3))
    with pytest.raises(ConfigError):
        RadioParams(noise=0.0)


def test_adjacency():
    assert are_adjacent(0, 6, GRID)
    assert not are_adjacent(0, 2, GRID)


def test_link_table_matches_direct():
    table = LinkTable(GRID, RADIO)
    for a, b in [(0, 1), (0, 24), (7, 13)]:
        assert table.rate(a, b) == pytest.approx(data_rate((a, b), 0, 1, RADIO, GRID), rel=1e-15)
    with pytest.raises(InfeasiblePlacementError):
        table.rate(3, 3)


cells = st.integers(0, 24)


@given(a=cells, b=cells)
def test_rate_symmetric_positive(a, b):
    if a == b:
        return
    ab = data_rate((a, b), 0, 1, RADIO, GRID)
    ba = data_rate((b, a), 0, 1, RADIO, GRID)
    assert ab == ba and ab > 0


@given(a=cells, b=cells, c=cells)
def test_rate_decreases_with_distance(a, b, c):
    if len({a, b, c}) < 3:
        return
    if distance(a, b, GRID) < distance(a, c, GRID):
        assert data_rate((a, b), 0, 1, RADIO, GRID) > data_rate((a, c), 0, 1, RADIO, GRID)


@given(g=st.floats(1e-12, 1.0))
def test_rate_monotone_in_gain(g):
    assert rate_from_gain(2 * g, RADIO) > rate_from_gain(g, RADIO)
