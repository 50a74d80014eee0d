"""Deterministic walker and sensor simulation."""
from .field import FieldBump, FieldRamp, MagneticFieldModel, device_vectors, field_model_from_document
from .plans import RoomSpec, make_corridor_plan
from .runner import (
    OUTCOME_ABORTED,
    OUTCOME_COMPLETED,
    OUTCOME_MISLED,
    OUTCOME_BACKTRACKED,
    PhaseLog,
    ScenarioRunner,
    SimResult,
    run_scenario,
)
from .scenarios import (
    builtin_scenario,
    builtin_scenario_names,
    load_scenario,
    many_wall_plan_doc,
    snake_route_doc,
    straight_corridor_doc,
    write_builtin_scenarios,
    zigzag_route_doc,
)
from .svg import render_svg
from .walker import WalkerModel, WalkerNoise, walker_from_document

__all__ = [
    "FieldBump", "FieldRamp", "MagneticFieldModel", "device_vectors",
    "field_model_from_document", "RoomSpec", "make_corridor_plan",
    "OUTCOME_ABORTED", "OUTCOME_COMPLETED", "OUTCOME_MISLED",
    "OUTCOME_BACKTRACKED", "PhaseLog", "ScenarioRunner", "SimResult",
    "run_scenario", "builtin_scenario", "builtin_scenario_names",
    "load_scenario", "many_wall_plan_doc", "snake_route_doc",
    "straight_corridor_doc", "write_builtin_scenarios", "zigzag_route_doc",
    "render_svg", "WalkerModel", "WalkerNoise", "walker_from_document",
]
