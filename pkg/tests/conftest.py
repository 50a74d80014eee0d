"""Shared fixtures: small floor plans and waypoint graphs."""
from __future__ import annotations

import pytest

from corridornav.geometry import load_floor_plan
from corridornav.route_graph import load_route_graph


def rect_walls(x0: float, y0: float, x1: float, y1: float) -> list:
    """Four boundary walls of an axis-aligned rectangle."""
    return [[[x0, y0], [x1, y0]], [[x1, y0], [x1, y1]],
            [[x1, y1], [x0, y1]], [[x0, y1], [x0, y0]]]


@pytest.fixture
def corridor_plan():
    """A 10 m x 2 m corridor bounded by four walls."""
    return load_floor_plan({"units": "meters", "walls": rect_walls(0, 0, 10, 2)})


@pytest.fixture
def l_graph():
    """L-shaped route: east 20 m to a corner, then north 20 m.

    The corner waypoint has a third stub segment so it counts as a real
    junction for association release.
    """
    return load_route_graph({
        "waypoints": [
            {"id": "a", "position": [0, 0]},
            {"id": "c", "position": [20, 0]},
            {"id": "b", "position": [20, 20]},
            {"id": "stub", "position": [28, 0]},
        ],
        "edges": [
            {"a": "a", "b": "c"},
            {"a": "c", "b": "b"},
            {"a": "c", "b": "stub"},
        ],
    })


@pytest.fixture
def three_leg_graph():
    """Straight east, north, east again: 12 m + 8 m + 9 m."""
    return load_route_graph({
        "waypoints": [
            {"id": "w0", "position": [0, 0]},
            {"id": "w1", "position": [12, 0]},
            {"id": "w2", "position": [12, 8]},
            {"id": "w3", "position": [21, 8]},
        ],
        "edges": [
            {"a": "w0", "b": "w1"},
            {"a": "w1", "b": "w2"},
            {"a": "w2", "b": "w3"},
        ],
    })
