"""Step-based dead reckoning primitives.

Two displacement sources are supported: a fixed per-user step length
applied along the device azimuth at each detected step, and integration
of an externally estimated planar velocity over the step interval scaled
by a per-user multiplier. Both are calibrated on a known straight path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, GeometryError
from .route_graph import wrap_angle

STEP_LENGTH_BOUNDS_M = (0.2, 1.2)
VELOCITY_MULTIPLIER_BOUNDS = (0.5, 2.0)
MIN_CALIBRATION_NET_DISPLACEMENT_M = 0.5
ORIENTATION_CALIBRATION_STEPS = 6

TURN_SMOOTHING_WINDOW = 5
TURN_STABLE_STEPS = 3
QUARTER_TURN = math.pi / 2.0


@dataclass(frozen=True)
class StepEvent:
    index: int
    time_s: float
    azimuth: float


@dataclass(frozen=True)
class TurnEvent:
    step_index: int
    angle: float  # multiple of pi/2 in (-pi, pi]


@dataclass(frozen=True)
class CalibrationResult:
    step_length_m: float
    velocity_multiplier: float = 1.0

    def __post_init__(self) -> None:
        lo, hi = STEP_LENGTH_BOUNDS_M
        if not lo < self.step_length_m < hi:
            raise CalibrationError(
                f"step length {self.step_length_m:.3f} m outside ({lo}, {hi})")
        lo, hi = VELOCITY_MULTIPLIER_BOUNDS
        if not lo < self.velocity_multiplier < hi:
            raise CalibrationError(
                f"velocity multiplier {self.velocity_multiplier:.3f} outside ({lo}, {hi})")


def calibrate_step_length(step_count: int, path_length_m: float) -> float:
    """Average step length over a straight calibration walk."""
    if step_count <= 0:
        raise CalibrationError("step count must be positive")
    if path_length_m <= 0:
        raise CalibrationError("path length must be positive")
    value = path_length_m / step_count
    lo, hi = STEP_LENGTH_BOUNDS_M
    if not lo < value < hi:
        raise CalibrationError(f"step length {value:.3f} m outside ({lo}, {hi})")
    return value


def calibrate_velocity_multiplier(true_length_m: float, estimated_length_m: float) -> float:
    """Scale factor mapping integrated velocity onto the true walked length."""
    if true_length_m <= 0 or estimated_length_m <= 0:
        raise CalibrationError("lengths must be positive")
    value = true_length_m / estimated_length_m
    lo, hi = VELOCITY_MULTIPLIER_BOUNDS
    if not lo < value < hi:
        raise CalibrationError(f"velocity multiplier {value:.3f} outside ({lo}, {hi})")
    return value


def as_displacement(step_length_m: float, azimuth: float) -> np.ndarray:
    """Planar displacement of one step taken along the given azimuth."""
    return np.array([step_length_m * math.cos(azimuth),
                     step_length_m * math.sin(azimuth)])


def integrate_velocity(times: np.ndarray, velocities: np.ndarray,
                       multiplier: float = 1.0,
                       t_start: float | None = None,
                       t_end: float | None = None) -> np.ndarray:
    """Trapezoidal integral of a sampled planar velocity over a step interval.

    Samples are treated as a piecewise-linear function of time. When
    explicit interval bounds are given the function is linearly
    interpolated inside the sampled range and held constant beyond it.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    v = np.asarray(velocities, dtype=float).reshape(-1, 2)
    if len(t) != len(v):
        raise ValueError("times and velocities must have the same length")
    if len(t) == 0:
        raise ValueError("empty step interval: no velocity samples")
    if np.any(np.diff(t) < 0):
        raise ValueError("velocity sample times must be non-decreasing")
    if t_start is not None or t_end is not None:
        t0 = float(t[0] if t_start is None else t_start)
        t1 = float(t[-1] if t_end is None else t_end)
        if t1 < t0:
            raise ValueError("empty step interval: t_end precedes t_start")
        vx = np.interp([t0, t1], t, v[:, 0])
        vy = np.interp([t0, t1], t, v[:, 1])
        inside = (t > t0) & (t < t1)
        t = np.concatenate([[t0], t[inside], [t1]])
        v = np.vstack([[vx[0], vy[0]], v[inside], [vx[1], vy[1]]])
    elif len(t) < 2:
        raise ValueError("empty step interval: need at least two samples "
                         "or explicit bounds")
    dt = np.diff(t)
    avg = 0.5 * (v[1:] + v[:-1])
    return multiplier * (avg * dt[:, None]).sum(axis=0)


def initial_orientation(displacements: np.ndarray, known_heading: float) -> float:
    """Rotation aligning the first few sensed displacements with a known heading.

    Expects exactly six per-step displacement vectors in the sensor frame.
    Returns the angle that rotates sensor-frame vectors into the plan frame.
    """
    d = np.asarray(displacements, dtype=float).reshape(-1, 2)
    if len(d) != ORIENTATION_CALIBRATION_STEPS:
        raise ValueError(
            f"need exactly {ORIENTATION_CALIBRATION_STEPS} displacements, got {len(d)}")
    net = d.sum(axis=0)
    norm = float(np.hypot(*net))
    if norm <= MIN_CALIBRATION_NET_DISPLACEMENT_M:
        raise CalibrationError(
            f"net displacement {norm:.2f} m too small for orientation calibration")
    return wrap_angle(known_heading - math.atan2(net[1], net[0]))


def rotate(vec: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    v = np.asarray(vec, dtype=float)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


class TurnTracker:
    """Incremental quantize-and-hold turn detector over per-step azimuths.

    The azimuth stream is unwrapped, smoothed with a centered moving
    average, and the change since the last emitted turn is quantized to
    the nearest quarter turn. A turn is emitted once the quantized change
    has stayed nonzero and constant for a few consecutive steps, so two
    quick quarter turns merge into a half turn.
    """

    def __init__(self, window: int = TURN_SMOOTHING_WINDOW,
                 stable_steps: int = TURN_STABLE_STEPS):
        if window % 2 != 1:
            raise ValueError("smoothing window must be odd")
        self.window = window
        self.half = window // 2
        self.stable_steps = stable_steps
        self._unwrapped: list[float] = []
        self._events: list[TurnEvent] = []
        self._reference: float | None = None
        self._pending_q = 0
        self._pending_count = 0
        self._pending_start = 0
        self._finalized = 0

    def push(self, azimuth: float) -> list[TurnEvent]:
        """Feed one per-step azimuth; returns turn events confirmed by it."""
        if self._unwrapped:
            prev = self._unwrapped[-1]
            self._unwrapped.append(prev + wrap_angle(azimuth - prev))
        else:
            self._unwrapped.append(float(azimuth))
        new_events: list[TurnEvent] = []
        # Step k can be smoothed once k + half samples are in.
        while self._finalized + self.half < len(self._unwrapped):
            new_events.extend(self._finalize(self._finalized))
            self._finalized += 1
        return new_events

    def finish(self) -> list[TurnEvent]:
        """Flush the steps still waiting for smoothing lookahead."""
        new_events: list[TurnEvent] = []
        while self._finalized < len(self._unwrapped):
            new_events.extend(self._finalize(self._finalized))
            self._finalized += 1
        return new_events

    @property
    def events(self) -> list[TurnEvent]:
        return list(self._events)

    def _smoothed(self, k: int) -> float:
        lo = max(0, k - self.half)
        hi = min(len(self._unwrapped), k + self.half + 1)
        return float(np.mean(self._unwrapped[lo:hi]))

    def _finalize(self, k: int) -> list[TurnEvent]:
        s = self._smoothed(k)
        if self._reference is None:
            self._reference = s
            return []
        q = int(round((s - self._reference) / QUARTER_TURN))
        out: list[TurnEvent] = []
        if q == 0:
            self._pending_q = 0
            self._pending_count = 0
        elif q == self._pending_q:
            self._pending_count += 1
            if self._pending_count >= self.stable_steps:
                angle = wrap_angle(q * QUARTER_TURN)
                if angle == -math.pi:
                    angle = math.pi
                if q % 4 != 0:
                    out.append(TurnEvent(self._pending_start, angle))
                    self._events.append(out[-1])
                self._reference += q * QUARTER_TURN
                self._pending_q = 0
                self._pending_count = 0
        else:
            self._pending_q = q
            self._pending_count = 1
            self._pending_start = k
        return out


def detect_turns(azimuths) -> list[TurnEvent]:
    """Run the turn detector over a whole per-step azimuth stream."""
    tracker = TurnTracker()
    for a in azimuths:
        tracker.push(float(a))
    tracker.finish()
    return tracker.events


def magnetic_feature(m, g) -> np.ndarray:
    """Orientation-invariant magnetic descriptor (vertical, horizontal size).

    m is the magnetic vector and g the gravity direction, both in the
    device frame. The result is unchanged by any rotation applied to both.
    """
    m = np.asarray(m, dtype=float)
    g = np.asarray(g, dtype=float)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        raise GeometryError("gravity vector must be nonzero")
    g = g / gn
    vertical = float(m @ g)
    horizontal = float(np.linalg.norm(m - vertical * g))
    return np.array([vertical, horizontal])


def magnetic_features(m: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Batch form of magnetic_feature for (N, 3) arrays."""
    m = np.asarray(m, dtype=float).reshape(-1, 3)
    g = np.asarray(g, dtype=float).reshape(-1, 3)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise GeometryError("gravity vectors must be nonzero")
    g = g / norms
    vertical = np.einsum("ij,ij->i", m, g)
    horizontal = np.linalg.norm(m - vertical[:, None] * g, axis=1)
    return np.column_stack([vertical, horizontal])
