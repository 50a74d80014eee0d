"""Exception types shared across the package."""


class CorridorNavError(Exception):
    """Base class for all domain errors raised by this package."""


class PlanError(CorridorNavError):
    """Floor-plan document is malformed or fails validation."""


class GeometryError(CorridorNavError):
    """Degenerate geometric input (for example a zero-length segment)."""


class RouteError(CorridorNavError):
    """No route exists, or a route query was made in an invalid state."""


class CalibrationError(CorridorNavError):
    """Calibration produced a value outside its plausible range."""


class TraceError(CorridorNavError):
    """Sensor trace file is malformed or contains invalid values."""


class RecordError(CorridorNavError):
    """Walk record is malformed or internally inconsistent."""


class TrackingLost(CorridorNavError):
    """Alignment can no longer follow the recorded walk; terminal."""


class ScenarioError(CorridorNavError):
    """Simulation cannot proceed (for example the walker is stuck)."""
