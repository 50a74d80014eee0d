"""Built-in scenario documents and fixture floor plans.

Each scenario is a plain JSON-serializable document: floor plan builder
parameters, waypoint graph, walker and field settings, the walker's
intended path and any scripted excursions, plus the outcome the run is
expected to produce under its fixed seed. The same documents are both
exercised by the test suite and written out as example files.
"""
from __future__ import annotations

import json
from pathlib import Path

from ..errors import ScenarioError

# Outcome the library pins for each scenario, under its own seed.

MISSED_TURN = {
    "name": "missed-turn",
    "pipeline": "wayfinding",
    "seed": 11,
    "expected_outcome": "completed-with-backtrack",
    "step_length_m": 0.65,
    "plan": {
        "corridors": [[[0, 0], [48, 0]], [[20, 0], [20, 18]], [[40, 0], [40, 20]]],
        "width": 2.0,
    },
    "graph": {
        "waypoints": [
            {"id": "w0", "position": [0, 0]},
            {"id": "wT", "position": [20, 0]},
            {"id": "wN", "position": [20, 18]},
            {"id": "w1", "position": [40, 0]},
            {"id": "wE", "position": [48, 0]},
            {"id": "w2", "position": [40, 20]},
        ],
        "edges": [
            {"a": "w0", "b": "wT"},
            {"a": "wT", "b": "w1"},
            {"a": "wT", "b": "wN"},
            {"a": "w1", "b": "wE"},
            {"a": "w1", "b": "w2"},
        ],
    },
    "route": ["w0", "w2"],
    "walker": {"azimuth_drift_deg_per_min": 1.0},
    "script": {
        "excursions": [{"trigger": [40, 0], "path": [[47.5, 0]]}],
    },
}

ROOM_ENTRY = {
    "name": "room-entry",
    "pipeline": "wayfinding",
    "seed": 23,
    "expected_outcome": "completed-with-backtrack",
    "step_length_m": 0.65,
    "plan": {
        "corridors": [[[0, 0], [30, 0]]],
        "width": 2.0,
        "rooms": [{"room_id": "lab", "rect": [6, 1, 20, 7],
                   "door_center": [14, 1], "door_width": 1.2}],
        "landmarks": [{"name": "water fountain", "position": [25, 0.8],
                       "side": "left"}],
    },
    "graph": {
        "waypoints": [
            {"id": "w0", "position": [0, 0]},
            {"id": "w1", "position": [30, 0]},
        ],
        "edges": [{"a": "w0", "b": "w1"}],
    },
    "route": ["w0", "w1"],
    "walker": {"azimuth_drift_deg_per_min": 0.5},
    "script": {
        "excursions": [{"trigger": [14, 0],
                        "path": [[14, 1.0], [14, 3.8], [7.5, 3.8]]}],
    },
}

SPUR = {
    "name": "spur",
    "pipeline": "backtracking",
    "seed": 37,
    "expected_outcome": "completed",
    "step_length_m": 0.65,
    "plan": {
        "corridors": [[[0, 0], [30, 0]], [[18, 0], [18, 4]]],
        "width": 2.0,
    },
    "field": {
        "bumps": [
            {"center": [3, 0], "amplitude": [6, -2, 9], "sigma_m": 1.5},
            {"center": [7.5, 0], "amplitude": [-5, 3, -12], "sigma_m": 1.8},
            {"center": [12, 0], "amplitude": [8, 1, 6], "sigma_m": 1.3},
            {"center": [16.5, 0], "amplitude": [-4, -6, 10], "sigma_m": 1.6},
            {"center": [21, 0], "amplitude": [7, 2, -8], "sigma_m": 1.4},
            {"center": [25.5, 0], "amplitude": [-6, 4, 11], "sigma_m": 1.7},
            {"center": [29, 0], "amplitude": [5, -3, -9], "sigma_m": 1.5},
            {"center": [18, 3], "amplitude": [-7, 2, 12], "sigma_m": 1.2},
        ],
    },
    "way_in": [[0, 0], [18, 0], [18, 4], [18, 0], [30, 0]],
    "walker": {"azimuth_drift_deg_per_min": 0.5},
    "script": {
        "return_points": [[30, 0], [0, 0]],
    },
}

PREMATURE_TURN = {
    "name": "premature-turn",
    "pipeline": "backtracking",
    "seed": 41,
    "expected_outcome": "completed-with-backtrack",
    "step_length_m": 0.65,
    "plan": {
        "corridors": [[[0, 0], [20, 0]], [[20, 0], [20, 12]],
                      [[12, -4], [12, 20]]],
        "width": 2.0,
    },
    "field": {
        "bumps": [
            {"center": [2.5, 0], "amplitude": [6, -3, 10], "sigma_m": 1.5},
            {"center": [6, 0], "amplitude": [-7, 2, -9], "sigma_m": 1.6},
            {"center": [9.5, 0], "amplitude": [5, 4, 12], "sigma_m": 1.3},
            {"center": [15, 0], "amplitude": [-6, -2, 8], "sigma_m": 1.7},
            {"center": [18.5, 0], "amplitude": [7, 1, -11], "sigma_m": 1.4},
            {"center": [20, 3], "amplitude": [-5, 3, 9], "sigma_m": 1.5},
            {"center": [20, 6.5], "amplitude": [6, -4, -10], "sigma_m": 1.6},
            {"center": [20, 10], "amplitude": [-8, 2, 12], "sigma_m": 1.3},
            {"center": [12, 4], "amplitude": [5, 2, -7], "sigma_m": 1.5},
            {"center": [12, 9], "amplitude": [-6, -3, 10], "sigma_m": 1.6},
            {"center": [12, 14], "amplitude": [7, 3, 9], "sigma_m": 1.4},
        ],
    },
    "way_in": [[0, 0], [20, 0], [20, 12]],
    "walker": {"azimuth_drift_deg_per_min": 0.5},
    "script": {
        "excursions": [{"trigger": [12, 0], "path": [[12, 18]]}],
    },
}

MAGNETIC_CROSSOVER = {
    "name": "magnetic-crossover",
    "pipeline": "backtracking",
    "seed": 53,
    "expected_outcome": "aborted",
    "step_length_m": 0.65,
    "plan": {
        "corridors": [[[0, 0], [24, 0]], [[24, 0], [24, 4]],
                      [[0, 4], [24, 4]]],
        "width": 2.0,
    },
    "way_in": [[0, 0], [24, 0]],
    # Bump rows repeat across both corridors (shared steel columns), so
    # the x pattern matches; only the cross-corridor ramp tells them apart.
    "field": {
        "bumps": [
            {"center": [3, 0], "amplitude": [5, -2, 11], "sigma_m": 1.4},
            {"center": [3, 4], "amplitude": [5, -2, 11], "sigma_m": 1.4},
            {"center": [7, 0], "amplitude": [-6, 3, -12], "sigma_m": 1.6},
            {"center": [7, 4], "amplitude": [-6, 3, -12], "sigma_m": 1.6},
            {"center": [11, 0], "amplitude": [7, 1, 9], "sigma_m": 1.3},
            {"center": [11, 4], "amplitude": [7, 1, 9], "sigma_m": 1.3},
            {"center": [15, 0], "amplitude": [-5, -4, -10], "sigma_m": 1.7},
            {"center": [15, 4], "amplitude": [-5, -4, -10], "sigma_m": 1.7},
            {"center": [19, 0], "amplitude": [6, 2, 12], "sigma_m": 1.4},
            {"center": [19, 4], "amplitude": [6, 2, 12], "sigma_m": 1.4},
            {"center": [23, 0], "amplitude": [-7, 3, -9], "sigma_m": 1.5},
            {"center": [23, 4], "amplitude": [-7, 3, -9], "sigma_m": 1.5},
        ],
        "ramps": [{"origin": [0, 0], "direction": [0, 1],
                   "slope": [0, 0, 5.0]}],
    },
    "walker": {"azimuth_drift_deg_per_min": 0.5},
    "script": {
        "return_points": [[24, 0], [24, 4], [0, 4]],
    },
}

_LIBRARY = {
    doc["name"]: doc
    for doc in (MISSED_TURN, ROOM_ENTRY, SPUR, PREMATURE_TURN,
                MAGNETIC_CROSSOVER)
}


def builtin_scenario_names() -> list[str]:
    return sorted(_LIBRARY)


def builtin_scenario(name: str) -> dict:
    try:
        return json.loads(json.dumps(_LIBRARY[name]))
    except KeyError:
        raise ScenarioError(
            f"unknown scenario {name!r}; available: {builtin_scenario_names()}"
        ) from None


def load_scenario(source: str | Path | dict) -> dict:
    """Scenario document from a dict, a JSON file path or a builtin name."""
    if isinstance(source, dict):
        return source
    path = Path(source)
    if path.exists():
        doc = json.loads(path.read_text())
        if not isinstance(doc, dict) or "pipeline" not in doc:
            raise ScenarioError(f"{path} is not a scenario document")
        return doc
    return builtin_scenario(str(source))


def write_builtin_scenarios(directory: str | Path) -> list[Path]:
    out = []
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in builtin_scenario_names():
        path = directory / f"{name.replace('-', '_')}.json"
        path.write_text(json.dumps(_LIBRARY[name], indent=2) + "\n")
        out.append(path)
    return out


# Fixture plans used by the benchmark and accuracy tests.

def snake_route_doc() -> dict:
    """A 123 m, four-turn route through a snaking corridor."""
    pts = {
        "s0": (0, 0), "s1": (30, 0), "s2": (30, 25), "s3": (0, 25),
        "s4": (0, 45), "s5": (18, 45),
    }
    return {
        "name": "snake",
        "pipeline": "wayfinding",
        "seed": 0,
        "step_length_m": 0.65,
        "plan": {
            "corridors": [[[0, 0], [30, 0]], [[30, 0], [30, 25]],
                          [[30, 25], [0, 25]], [[0, 25], [0, 45]],
                          [[0, 45], [18, 45]]],
            "width": 2.0,
        },
        "graph": {
            "waypoints": [{"id": k, "position": list(v)} for k, v in pts.items()],
            "edges": [{"a": f"s{i}", "b": f"s{i+1}"} for i in range(5)],
        },
        "route": ["s0", "s5"],
        "walker": {},
    }


def zigzag_route_doc(legs: int = 10, leg_m: float = 12.0) -> dict:
    """A staircase route whose many turns let step length errors show up."""
    pts = [(0.0, 0.0)]
    for k in range(legs):
        x, y = pts[-1]
        if k % 2 == 0:
            pts.append((x + leg_m, y))
        else:
            pts.append((x, y + leg_m))
    corridors = [[list(pts[i]), list(pts[i + 1])] for i in range(legs)]
    return {
        "name": "zigzag",
        "pipeline": "wayfinding",
        "seed": 0,
        "step_length_m": 0.65,
        "plan": {"corridors": corridors, "width": 2.0},
        "graph": {
            "waypoints": [{"id": f"z{i}", "position": list(p)}
                          for i, p in enumerate(pts)],
            "edges": [{"a": f"z{i}", "b": f"z{i+1}"} for i in range(legs)],
        },
        "route": ["z0", f"z{legs}"],
        "walker": {},
    }


def many_wall_plan_doc(stubs: int = 56) -> dict:
    """A corridor with dense wall clutter for load testing the filter."""
    corridors = [[[0.0, 0.0], [70.0, 0.0]]]
    for k in range(stubs):
        x = 2.0 + k * 1.2
        if x > 68.0:
            break
        side = 1.0 if k % 2 == 0 else -1.0
        corridors.append([[x, side * 1.0], [x, side * 2.2]])
    return {"corridors": corridors, "width": 2.0}


def straight_corridor_doc(length_m: float = 40.0) -> dict:
    return {
        "name": "straight",
        "pipeline": "wayfinding",
        "seed": 0,
        "step_length_m": 0.65,
        "plan": {"corridors": [[[0, 0], [length_m, 0]]], "width": 2.0},
        "graph": {
            "waypoints": [{"id": "a", "position": [0, 0]},
                          {"id": "b", "position": [length_m, 0]}],
            "edges": [{"a": "a", "b": "b"}],
        },
        "route": ["a", "b"],
        "walker": {},
    }
