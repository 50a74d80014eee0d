"""Indoor walking navigation: map-constrained tracking and route
backtracking over step, azimuth and magnetometer streams, with spoken
guidance and a deterministic simulator for end-to-end runs."""
from .backtrack import (
    OnlineAligner,
    ProjectedSequence,
    WayInRecord,
    dump_record,
    load_record,
    record_way_in,
    simplify,
)
from .config import AppConfig, default_config, dump_config, load_config
from .errors import (
    CalibrationError,
    CorridorNavError,
    GeometryError,
    PlanError,
    RecordError,
    RouteError,
    ScenarioError,
    TraceError,
    TrackingLost,
)
from .evaluate import evaluate_backtrack, evaluate_result, evaluate_wayfinding
from .geometry import FloorPlan, dump_floor_plan, load_floor_plan
from .guidance import (
    GuidanceConfig,
    Notification,
    backtracking_guidance,
    describe_route,
    wayfinding_guidance,
)
from .particle_filter import FilterConfig, FilterState, init_filter, step_update
from .pdr import (
    TurnTracker,
    calibrate_step_length,
    calibrate_velocity_multiplier,
    detect_turns,
    initial_orientation,
    magnetic_feature,
)
from .route_graph import Route, RouteGraph, load_route_graph, shortest_route
from .session import (
    BacktrackRecorder,
    BacktrackReturnSession,
    WayfindingSession,
    record_from_trace,
    run_backtrack_return,
    run_wayfinding,
)
from .trace import SensorTrace, read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "OnlineAligner", "ProjectedSequence", "WayInRecord", "dump_record",
    "load_record", "record_way_in", "simplify",
    "AppConfig", "default_config", "dump_config", "load_config",
    "CalibrationError", "CorridorNavError", "GeometryError", "PlanError",
    "RecordError", "RouteError", "ScenarioError", "TraceError", "TrackingLost",
    "evaluate_backtrack", "evaluate_result", "evaluate_wayfinding",
    "FloorPlan", "dump_floor_plan", "load_floor_plan",
    "GuidanceConfig", "Notification", "backtracking_guidance",
    "describe_route", "wayfinding_guidance",
    "FilterConfig", "FilterState", "init_filter", "step_update",
    "TurnTracker", "calibrate_step_length", "calibrate_velocity_multiplier",
    "detect_turns", "initial_orientation", "magnetic_feature",
    "Route", "RouteGraph", "load_route_graph", "shortest_route",
    "BacktrackRecorder", "BacktrackReturnSession", "WayfindingSession",
    "record_from_trace", "run_backtrack_return", "run_wayfinding",
    "SensorTrace", "read_trace", "write_trace",
    "__version__",
]
