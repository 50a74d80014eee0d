"""Live session objects that glue the pipeline stages together.

A wayfinding session consumes step and velocity events, keeps the map
filter updated, binds estimates to the route graph and feeds the
guidance policy. A return session consumes the outbound walk record
plus live steps and magnetic samples, aligns them online and projects
the walker onto the recorded path. Both expose per-step log rows so a
run can be written out and inspected offline.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .backtrack import (
    OnlineAligner,
    ProjectedSequence,
    WayInRecord,
    advance_projection,
    record_way_in,
)
from .config import AppConfig, default_config
from .errors import RouteError, TraceError
from .geometry import FloorPlan
from .guidance import (
    WRONG_DIRECTION_TEXT,
    GuidanceConfig,
    GuidanceContext,
    GuidanceState,
    Notification,
    SegmentEntry,
    backtracking_guidance,
    describe_route,
    on_update,
    repeat_last,
)
from .particle_filter import (
    FilterState,
    MODE_VELOCITY,
    effective_sample_size,
    init_filter,
    propagate,
    resample,
    reweight,
)
from .pdr import (
    ORIENTATION_CALIBRATION_STEPS,
    TurnTracker,
    as_displacement,
    initial_orientation,
    integrate_velocity,
    magnetic_feature,
    rotate,
)
from .route_graph import (
    Route,
    RouteGraph,
    RouteLeg,
    SegmentAssociation,
    associate,
    initial_association,
    junction_kind,
    nearby_landmarks,
    remaining_route,
    shortest_route,
    wrap_angle,
)
from .trace import SensorTrace

# Steps are released to the alignment stage only once turn detection has
# had time to settle behind them.
RETURN_PIPELINE_LAG_STEPS = 6

# Arrival on the return path needs alignment backing this recent, in
# steps; dead reckoning alone must not be able to declare arrival.
RELIABLE_STALENESS_STEPS = 10


class EstimateRow(NamedTuple):
    step_index: int
    x: float
    y: float
    ess: float
    reset: bool


class ReturnRow(NamedTuple):
    step_index: int
    way_in_index: int
    cost: float
    layer_deg: int
    reliable: bool
    position_steps: float
    divergence_steps: float
    lost: bool


class WayfindingSession:
    """Closed-loop route following over the map-constrained filter.

    The first few steps are walked along a known heading to estimate the
    device orientation offset; they are buffered and replayed through
    the filter once the offset is known. Guidance starts after that.
    """

    def __init__(self, plan: FloorPlan, graph: RouteGraph, route: Route,
                 step_length_m: float, known_heading: float,
                 config: AppConfig | None = None, seed: int = 0,
                 velocity_multiplier: float = 1.0,
                 destination_ends_at_wall: bool = False,
                 start_time_s: float = 0.0):
        self.plan = plan
        self.graph = graph
        self.route = route
        self.step_length_m = step_length_m
        self.known_heading = known_heading
        self.config = config if config is not None else default_config()
        self.velocity_multiplier = velocity_multiplier
        self.destination_ends_at_wall = destination_ends_at_wall
        self.seed = seed
        self.reroute_on_warning = True

        start = graph.waypoints[route.start]
        self.start = np.asarray(start, dtype=float)
        self.state: FilterState | None = None
        self.assoc: SegmentAssociation = initial_association(graph, self.start)
        self.guidance = GuidanceState()
        self.estimate_rows: list[EstimateRow] = []
        self.notifications: list[Notification] = []
        self.arrived = False

        self._offset: float | None = None
        self._calib_disp: list[np.ndarray] = []
        self._calib_steps: list[tuple[float, float]] = []
        self._vel_t: list[float] = []
        self._vel: list[tuple[float, float]] = []
        self._last_step_t: float | None = None
        self._toward: str | None = None
        self._min_remaining: float | None = None
        self._divergence_m = 0.0
        self._last_heading = known_heading

        # Greet before the first step so the channel is free again by the
        # time tracking starts.
        self._emit(GuidanceContext(time_s=start_time_s,
                                   step_length_m=step_length_m))

    @property
    def velocity_mode(self) -> bool:
        return self.config.filter.mode == MODE_VELOCITY

    @property
    def calibrating(self) -> bool:
        return self._offset is None

    @property
    def orientation_offset(self) -> float | None:
        return self._offset

    def on_velocity_sample(self, time_s: float, vx: float, vy: float) -> None:
        self._vel_t.append(float(time_s))
        self._vel.append((float(vx), float(vy)))

    def _raw_displacement(self, time_s: float, azimuth: float) -> np.ndarray:
        if not self.velocity_mode:
            return as_displacement(self.step_length_m, azimuth)
        if not self._vel_t:
            raise TraceError("velocity mode needs velocity samples")
        t0 = self._last_step_t if self._last_step_t is not None else self._vel_t[0]
        return integrate_velocity(np.asarray(self._vel_t), np.asarray(self._vel),
                                  self.velocity_multiplier, t_start=t0, t_end=time_s)

    def on_step(self, time_s: float, azimuth: float) -> list[Notification]:
        raw = self._raw_displacement(time_s, azimuth)
        self._last_step_t = time_s
        if self._offset is None:
            self._calib_disp.append(raw)
            self._calib_steps.append((time_s, azimuth))
            if len(self._calib_disp) < ORIENTATION_CALIBRATION_STEPS:
                return []
            self._offset = initial_orientation(np.vstack(self._calib_disp),
                                               self.known_heading)
            self.state = init_filter(self.start, self.step_length_m,
                                     self.config.filter, self.seed)
            for disp, (t, az) in zip(self._calib_disp, self._calib_steps):
                self._advance(t, rotate(disp, self._offset),
                              wrap_angle(az + self._offset), guide=False)
            t_last, az_last = self._calib_steps[-1]
            return self._guide(t_last, wrap_angle(az_last + self._offset), 0.0)
        heading = wrap_angle(azimuth + self._offset)
        disp = rotate(raw, self._offset)
        return self._advance(time_s, disp, heading, guide=True)

    def _advance(self, time_s: float, displacement: np.ndarray,
                 heading: float, guide: bool) -> list[Notification]:
        cfg = self.config.filter
        propagate(self.state, displacement, cfg)
        reweight(self.state, self.plan, cfg)
        estimate = self.state.estimate.copy()
        ess = effective_sample_size(self.state.weights)
        reset = self.state.last_reset
        if not reset:
            resample(self.state, cfg)
        self.estimate_rows.append(EstimateRow(
            self.state.step_count, float(estimate[0]), float(estimate[1]),
            float(ess), bool(reset)))
        self.assoc = associate(self.assoc, estimate, self.graph)
        self._last_heading = heading
        if not guide or self.arrived:
            return []
        return self._guide(time_s, heading,
                           float(np.hypot(displacement[0], displacement[1])))

    def _remaining(self):
        try:
            return remaining_route(self.route, self.graph, self.assoc)
        except RouteError:
            return None

    def _guide(self, time_s: float, heading: float,
               step_norm: float) -> list[Notification]:
        estimate = self.state.estimate
        rem = self._remaining()
        if rem is None:
            self._divergence_m += step_norm
        else:
            total = sum(leg.length for leg in rem.legs)
            if self._min_remaining is None or total < self._min_remaining:
                self._min_remaining = total
            self._divergence_m = max(0.0, total - self._min_remaining)
            if total <= self.config.guidance.arrival_threshold:
                self.arrived = True

        ctx = GuidanceContext(time_s=time_s, step_length_m=self.step_length_m,
                              wrong_direction_accum=self._divergence_m,
                              at_destination=self.arrived,
                              destination_ends_at_wall=self.destination_ends_at_wall)
        if rem is not None:
            self._fill_route_context(ctx, rem)
        ctx.landmarks = nearby_landmarks(
            estimate, self.plan, heading,
            radius=self.config.guidance.landmark_radius_m)

        out = self._emit(ctx)
        if self.reroute_on_warning and any(
                n.kind == "wrong-direction" for n in out):
            self._reroute()
        return out

    def _fill_route_context(self, ctx: GuidanceContext, rem) -> None:
        leg0 = rem.legs[0]
        ctx.distance_to_next = rem.distance_to_next
        ctx.next_anchor = rem.next_waypoint
        if leg0.turn is None:
            ctx.next_kind = "destination"
        elif leg0.turn == "straight":
            ctx.next_kind = "straight"
        else:
            ctx.next_kind = "turn"
            ctx.next_turn_direction = leg0.turn
            ids = self.route.waypoint_ids
            k = ids.index(rem.next_waypoint)
            if k >= 1:
                seg_idx = self.graph.segment_between(ids[k - 1], ids[k])
                ctx.junction_token = junction_kind(self.graph,
                                                   rem.next_waypoint, seg_idx)
        if rem.next_waypoint != self._toward:
            self._toward = rem.next_waypoint
            keep = None
            if self.assoc.segment is not None:
                keep = self.graph.segments[self.assoc.segment].keep_side
            turn = leg0.turn if leg0.turn in ("left", "right") else None
            ctx.segment_entered = SegmentEntry(
                anchor=rem.next_waypoint, length_m=rem.distance_to_next,
                keep_side=keep, next_turn_direction=turn)

    def _emit(self, ctx: GuidanceContext) -> list[Notification]:
        out = on_update(ctx, self.guidance, self.config.guidance)
        self.notifications.extend(out)
        return out

    def _reroute(self) -> None:
        if self.assoc.segment is not None:
            seg = self.graph.segments[self.assoc.segment]
            a = np.asarray(self.graph.waypoints[seg.a], dtype=float)
            d = float(np.hypot(*(self.assoc.point - a)))
            here = seg.a if d <= seg.length / 2 else seg.b
        elif self.assoc.junction is not None:
            here = self.assoc.junction
        else:
            return
        goal = self.route.goal
        if here == goal:
            return
        try:
            self.route = shortest_route(self.graph, here, goal)
        except RouteError:
            return
        self._min_remaining = None
        self._divergence_m = 0.0
        self._toward = None
        # Fresh route: allow approach and briefing anchors to fire again.
        self.guidance.issued = {a for a in self.guidance.issued
                                if a[0] not in ("approach", "segment")}

    @property
    def estimate(self) -> np.ndarray | None:
        return None if self.state is None else self.state.estimate.copy()

    def describe_remaining(self, units: str | None = None) -> str:
        """On-demand route overview, as read out when the user asks."""
        if self.state is None:
            return ""
        rem = self._remaining()
        if rem is None:
            return WRONG_DIRECTION_TEXT
        return describe_route(rem.legs, units or self.config.guidance.units,
                              self.step_length_m)

    def repeat(self) -> str:
        return repeat_last(self.guidance)


class BacktrackRecorder:
    """Accumulates one outbound walk into a way-in record."""

    def __init__(self, step_length_m: float):
        self.step_length_m = step_length_m
        self._step_t: list[float] = []
        self._step_az: list[float] = []
        self._feat_t: list[float] = []
        self._feat: list[np.ndarray] = []

    def on_sample(self, time_s: float, magnetic, gravity) -> None:
        self._feat_t.append(float(time_s))
        self._feat.append(magnetic_feature(magnetic, gravity))

    def on_step(self, time_s: float, azimuth: float) -> None:
        self._step_t.append(float(time_s))
        self._step_az.append(float(azimuth))

    @property
    def step_count(self) -> int:
        return len(self._step_t)

    def finalize(self, session_start: float | None = None) -> WayInRecord:
        tracker = TurnTracker()
        events = []
        for az in self._step_az:
            events.extend(tracker.push(az))
        events.extend(tracker.finish())
        return record_way_in(self._step_t, events, self._feat_t,
                             np.vstack(self._feat) if self._feat else np.empty((0, 2)),
                             self.step_length_m, session_start)


def _next_turn_info(seq: ProjectedSequence) -> tuple[float, int, str] | None:
    """(steps to corner, corner ordinal, turn word) for the next recorded turn."""
    acc = 0.0
    for k, count in enumerate(seq.segments[:-1]):
        acc += count
        if acc >= seq.position:
            q = (seq.directions[k + 1] - seq.directions[k]) % 4
            word = {1: "left", 2: "around", 3: "right"}[q]
            return acc - seq.position, k + 1, word
    return None


def _segment_ordinal(seq: ProjectedSequence) -> int:
    acc = 0.0
    for k, count in enumerate(seq.segments):
        acc += count
        if seq.position < acc:
            return k
    return len(seq.segments) - 1


class BacktrackReturnSession:
    """Guides the walker back along the reversed outbound record.

    Steps are buffered for a few counts so the turn detector can settle,
    then released: their magnetic samples feed the online alignment, and
    step and turn events advance the projected position on the recorded
    path. Reliable alignment stretches re-anchor the projection.
    """

    def __init__(self, record: WayInRecord,
                 guidance_config: GuidanceConfig | None = None,
                 config: AppConfig | None = None,
                 destination_ends_at_wall: bool = False,
                 start_time_s: float = 0.0):
        self.record = record
        self.config = config if config is not None else default_config()
        bt = self.config.backtrack
        self.guidance_config = (guidance_config if guidance_config is not None
                                else backtracking_guidance())
        self.aligner = OnlineAligner(
            record,
            window=bt.alignment_window_samples,
            skip_cost_floor=bt.skip_cost_floor,
            skip_cost_fraction=bt.skip_cost_fraction,
            layer_cost_factor=bt.layer_cost_factor,
            tail_samples=bt.tail_samples,
            slope_bounds=(bt.tail_slope_min, bt.tail_slope_max),
            tail_max_rms=bt.tail_max_rms,
            lost_after=bt.lost_after_pinned_columns)
        self.tracker = TurnTracker()
        self.guidance = GuidanceState()
        self.destination_ends_at_wall = destination_ends_at_wall
        self.projection: ProjectedSequence | None = None
        self.rows: list[ReturnRow] = []
        self.notifications: list[Notification] = []
        self.arrived = False
        self.lost = False

        self._steps: list[tuple[float, float]] = []
        self._flushed = 0
        self._ft = np.empty(0)
        self._fv = np.empty((0, 2))
        self._pend_t: list[float] = []
        self._pend_f: list[np.ndarray] = []
        self._boundary_turns: dict[int, float] = {}
        self._proj_done: set[int] = set()
        self._align_done: set[int] = set()
        self._current_segment: int | None = None
        self._last_reliable_flush: int | None = None

        self._emit(GuidanceContext(time_s=start_time_s,
                                   step_length_m=record.step_length_m))

    def on_sample(self, time_s: float, magnetic, gravity) -> None:
        self._pend_t.append(float(time_s))
        self._pend_f.append(magnetic_feature(magnetic, gravity))

    def _features(self) -> tuple[np.ndarray, np.ndarray]:
        if self._pend_t:
            self._ft = np.concatenate([self._ft, np.asarray(self._pend_t)])
            self._fv = np.vstack([self._fv, np.asarray(self._pend_f)])
            self._pend_t, self._pend_f = [], []
        return self._ft, self._fv

    def on_step(self, time_s: float, azimuth: float) -> list[Notification]:
        for ev in self.tracker.push(float(azimuth)):
            self._boundary_turns[ev.step_index] = (
                self._boundary_turns.get(ev.step_index, 0.0) + ev.angle)
        self._steps.append((float(time_s), float(azimuth)))
        out: list[Notification] = []
        while self._flushed < len(self._steps) - RETURN_PIPELINE_LAG_STEPS:
            out.extend(self._flush(self._flushed))
        return out

    def finish(self) -> list[Notification]:
        """Release the buffered tail once the walk has ended."""
        for ev in self.tracker.finish():
            self._boundary_turns[ev.step_index] = (
                self._boundary_turns.get(ev.step_index, 0.0) + ev.angle)
        out: list[Notification] = []
        while self._flushed < len(self._steps):
            out.extend(self._flush(self._flushed))
        return out

    def _boundary_time(self, j: int) -> float:
        if j > 0:
            return self._steps[j - 1][0]
        t0 = self._steps[0][0]
        if len(self._steps) > 1:
            return t0 - (self._steps[1][0] - t0)
        return t0 - 0.5

    def _flush(self, j: int) -> list[Notification]:
        t_step, _ = self._steps[j]
        if self.lost or self.arrived:
            self._flushed = j + 1
            return []

        for b in sorted(k for k in self._boundary_turns
                        if k <= j and k not in self._proj_done):
            if self.projection is not None:
                advance_projection(self.projection,
                                   ("turn", self._boundary_turns[b]))
            self._proj_done.add(b)

        angles = [0.0, 0.0, 0.0]
        for b in list(self._boundary_turns):
            if b in self._align_done:
                continue
            if b == j + 1:
                angles[2] += self._boundary_turns[b]
                self._align_done.add(b)
            elif b <= j:
                angles[0] += self._boundary_turns[b]
                self._align_done.add(b)

        b_prev = self._boundary_time(j)
        ft, fv = self._features()
        if len(ft) == 0:
            raise TraceError("return stream has no magnetic samples")
        result = None
        for k in range(3):
            ts = b_prev + (t_step - b_prev) * (k + 1) / 3.0
            feat = np.array([np.interp(ts, ft, fv[:, 0]),
                             np.interp(ts, ft, fv[:, 1])])
            result = self.aligner.push(feat, angles[k], time_s=t_step)

        if self.projection is not None:
            advance_projection(self.projection, ("step",))
        if result.reliable is not None:
            self._last_reliable_flush = j
            if self.projection is None:
                self.projection = ProjectedSequence.from_record(
                    self.record, result.reliable)
                self.projection.vertex_snap_steps = (
                    self.config.backtrack.vertex_snap_steps)
            else:
                self.projection.re_anchor(result.reliable)
        if result.lost:
            self.lost = True

        pos = self.projection.position if self.projection else 0.0
        div = self.projection.divergence_steps if self.projection else 0.0
        self.rows.append(ReturnRow(j, result.way_in_index, result.cost,
                                   result.layer_deg, result.reliable is not None,
                                   float(pos), float(div), result.lost))
        self._flushed = j + 1
        if self.lost:
            return []
        return self._guide(t_step, j)

    def _guide(self, time_s: float, flush_index: int) -> list[Notification]:
        ctx = GuidanceContext(time_s=time_s,
                              step_length_m=self.record.step_length_m,
                              destination_ends_at_wall=self.destination_ends_at_wall)
        seq = self.projection
        if seq is not None:
            ctx.wrong_direction_accum = seq.divergence_steps
            info = _next_turn_info(seq)
            if info is not None:
                dist, ordinal, word = info
                ctx.distance_to_next = dist
                ctx.next_kind = "turn"
                ctx.next_turn_direction = word
                ctx.next_anchor = f"corner-{ordinal}"
            else:
                remaining = seq.remaining_steps()
                ctx.distance_to_next = remaining
                ctx.next_kind = "destination"
                ctx.next_anchor = "destination"
                fresh = (self._last_reliable_flush is not None
                         and flush_index - self._last_reliable_flush
                         <= RELIABLE_STALENESS_STEPS)
                if remaining <= self.guidance_config.arrival_threshold and fresh:
                    self.arrived = True
                    ctx.at_destination = True
            ordinal = _segment_ordinal(seq)
            if ordinal != self._current_segment:
                self._current_segment = ordinal
                length = (ctx.distance_to_next if ctx.distance_to_next is not None
                          else seq.remaining_steps())
                turn = None
                if ctx.next_kind == "turn" and ctx.next_turn_direction in ("left", "right"):
                    turn = ctx.next_turn_direction
                ctx.segment_entered = SegmentEntry(
                    anchor=f"seg-{ordinal}",
                    length_m=length * self.record.step_length_m,
                    next_turn_direction=turn,
                    length_steps=length)
        return self._emit(ctx)

    def _emit(self, ctx: GuidanceContext) -> list[Notification]:
        out = on_update(ctx, self.guidance, self.guidance_config)
        self.notifications.extend(out)
        return out

    def describe_remaining(self, units: str | None = None) -> str:
        """On-demand overview of the rest of the recorded path."""
        seq = self.projection
        if seq is None:
            return ""
        legs: list[RouteLeg] = []
        acc = 0.0
        for k, count in enumerate(seq.segments):
            lo, hi = acc, acc + count
            acc = hi
            if hi <= seq.position:
                continue
            steps = hi - max(seq.position, lo)
            turn = None
            if k < len(seq.segments) - 1:
                q = (seq.directions[k + 1] - seq.directions[k]) % 4
                turn = {1: "left", 2: "around", 3: "right"}[q]
            legs.append(RouteLeg(steps * self.record.step_length_m, turn,
                                 f"seg-{k}"))
        return describe_route(legs, units or self.guidance_config.units,
                              self.record.step_length_m)

    def repeat(self) -> str:
        return repeat_last(self.guidance)


def record_from_trace(trace: SensorTrace, step_length_m: float,
                      session_start: float | None = None) -> WayInRecord:
    """Build a way-in record straight from a recorded sensor trace."""
    rec = BacktrackRecorder(step_length_m)
    steps = set(trace.step_indices())
    for i in range(len(trace.t)):
        rec.on_sample(trace.t[i], trace.magnetic[i], trace.gravity[i])
        if i in steps:
            rec.on_step(trace.t[i], trace.azimuth[i])
    if rec.step_count == 0:
        raise TraceError("trace contains no step events")
    return rec.finalize(session_start)


def run_wayfinding(trace: SensorTrace, plan: FloorPlan, graph: RouteGraph,
                   route: Route, step_length_m: float, known_heading: float,
                   config: AppConfig | None = None, seed: int = 0,
                   velocity_multiplier: float = 1.0) -> WayfindingSession:
    """Replay a recorded trace through a wayfinding session."""
    config = config if config is not None else default_config()
    session = WayfindingSession(plan, graph, route, step_length_m,
                                known_heading, config, seed,
                                velocity_multiplier,
                                start_time_s=float(trace.t[0]))
    steps = set(trace.step_indices())
    for i in range(len(trace.t)):
        if session.velocity_mode and trace.velocity is not None:
            session.on_velocity_sample(trace.t[i], trace.velocity[i, 0],
                                       trace.velocity[i, 1])
        if i in steps:
            session.on_step(trace.t[i], trace.azimuth[i])
    return session


def run_backtrack_return(record: WayInRecord, trace: SensorTrace,
                         guidance_config: GuidanceConfig | None = None,
                         config: AppConfig | None = None) -> BacktrackReturnSession:
    """Replay a recorded return trace against a way-in record."""
    session = BacktrackReturnSession(record, guidance_config, config,
                                     start_time_s=float(trace.t[0]))
    steps = set(trace.step_indices())
    for i in range(len(trace.t)):
        session.on_sample(trace.t[i], trace.magnetic[i], trace.gravity[i])
        if i in steps:
            session.on_step(trace.t[i], trace.azimuth[i])
    session.finish()
    return session
