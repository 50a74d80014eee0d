"""Closed-loop scenario execution.

A simulated walker follows an intended polyline through the floor plan,
step by step, while the sensor model writes a 25 Hz trace and the live
session consumes it. Notifications feed back into the walker: a scripted
excursion (a missed turn, a detour into a room, a premature turn) ends
when the walker hears the wrong-direction warning, waits out a reaction
delay, retraces the excursion and resumes the plan. Everything is driven
by one seeded generator, so a scenario run is fully reproducible.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..backtrack import WayInRecord, simplify
from ..config import AppConfig, default_config
from ..errors import ScenarioError
from ..guidance import backtracking_guidance, wayfinding_guidance
from ..particle_filter import FilterConfig
from ..route_graph import Route, RouteGraph, load_route_graph, shortest_route, wrap_angle
from ..session import (
    BacktrackRecorder,
    BacktrackReturnSession,
    WayfindingSession,
)
from ..trace import SensorTrace
from .field import MagneticFieldModel, device_vectors, field_model_from_document
from .plans import RoomSpec, make_corridor_plan
from .walker import WalkerModel, WalkerNoise, walker_from_document

SAMPLE_HZ = 25.0
MAG_NOISE_UT = 0.3
GRAVITY_NOISE = 0.02
VELOCITY_NOISE = 0.03
STUCK_LIMIT_S = 60.0
STEP_BUDGET = 4000

OUTCOME_COMPLETED = "completed"
OUTCOME_BACKTRACKED = "completed-with-backtrack"
OUTCOME_MISLED = "misled"
OUTCOME_ABORTED = "aborted"


@dataclass
class Excursion:
    trigger: np.ndarray
    path: list[np.ndarray]
    triggered: bool = False


class _Walker:
    """Intent-following walker with scripted excursions and recovery."""

    def __init__(self, model: WalkerModel, rng: np.random.Generator,
                 start, targets, excursions: list[Excursion]):
        self.model = model
        self.noise = WalkerNoise(model, rng)
        self.pos = np.asarray(start, dtype=float).copy()
        self.targets: list[np.ndarray] = [np.asarray(t, dtype=float) for t in targets]
        self.excursions = excursions
        self.heading = 0.0
        if self.targets:
            d = self.targets[0] - self.pos
            self.heading = math.atan2(d[1], d[0])
        self.done = False
        self.step_count = 0
        self.state = "follow"
        self._saved: list[np.ndarray] = []
        self._visited: list[np.ndarray] = []
        self._recover_at: int | None = None
        self.recoveries = 0
        self._arrive_tol = 0.5 * model.step_length_m
        # Heading wander can put the walker most of a corridor half-width
        # off the centerline, so scripted triggers fire on passing abeam
        # of the trigger point instead of on a small radius around it.
        self._trigger_along = 0.8 * model.step_length_m
        self._trigger_lateral = 1.5

    def hear_wrong_direction(self) -> None:
        if self.state == "excursion" and self._recover_at is None:
            self._recover_at = self.step_count + self.model.reaction_delay_steps

    def _begin_recovery(self) -> None:
        back = [p.copy() for p in reversed(self._visited)]
        self.targets = back
        self.state = "recover"
        self._recover_at = None
        self.recoveries += 1

    def _advance_target(self) -> None:
        if self.state == "excursion":
            self._visited.append(self.targets[0].copy())
        junction = self.targets.pop(0)
        if not self.targets:
            if self.state == "follow":
                self.done = True
            elif self.state == "excursion":
                # Script exhausted without a warning; retrace anyway.
                self._begin_recovery()
            else:
                self.targets = self._saved
                self._saved = []
                self.state = "follow"
                if not self.targets:
                    self.done = True
            return
        if self.state == "follow":
            self._junction_behavior(junction)

    def _junction_behavior(self, junction: np.ndarray) -> None:
        """Compliance and lag at a route turn; straight-through is free."""
        d = self.targets[0] - junction
        turn = abs(wrap_angle(math.atan2(d[1], d[0]) - self.heading))
        if turn < math.radians(30.0):
            return
        ahead = np.array([math.cos(self.heading), math.sin(self.heading)])
        if self.noise.rng.random() >= self.model.compliance:
            # Notification missed: carry straight on past the junction
            # until a wrong-direction warning turns the walker around.
            self._saved = self.targets
            self.targets = [junction + 8.0 * ahead]
            self._visited = [junction.copy()]
            self.state = "excursion"
        elif self.model.turn_lag_steps > 0:
            # Turn executed late: overshoot, then back to the junction.
            lag = self.model.turn_lag_steps * self.model.step_length_m
            self.targets = [junction + lag * ahead, junction.copy()] + self.targets

    def _check_triggers(self, prev: np.ndarray) -> None:
        if self.state != "follow":
            return
        seg = self.pos - prev
        length = float(np.hypot(seg[0], seg[1]))
        if length <= 0.0:
            return
        u = seg / length
        for exc in self.excursions:
            if exc.triggered:
                continue
            w = exc.trigger - prev
            along = float(u[0] * w[0] + u[1] * w[1])
            lateral = abs(float(u[0] * w[1] - u[1] * w[0]))
            if (-self._trigger_along <= along <= length + self._trigger_along
                    and lateral <= self._trigger_lateral):
                exc.triggered = True
                self._saved = self.targets
                self.targets = [p.copy() for p in exc.path]
                self._visited = [exc.trigger.copy()]
                self.state = "excursion"
                return

    def step(self) -> bool:
        """Take one step toward the current target; False when finished."""
        if self.done:
            return False
        if (self.state == "excursion" and self._recover_at is not None
                and self.step_count >= self._recover_at):
            self._begin_recovery()
        while self.targets and float(
                np.hypot(*(self.targets[0] - self.pos))) <= self._arrive_tol:
            self._advance_target()
            if self.done:
                return False
        if not self.targets:
            self.done = True
            return False
        target = self.targets[0]
        d = target - self.pos
        dist = float(np.hypot(d[0], d[1]))
        length = self.noise.step_length()
        if length >= dist:
            move = d
        else:
            psi = math.atan2(d[1], d[0]) + self.noise.heading_wander()
            move = length * np.array([math.cos(psi), math.sin(psi)])
        prev = self.pos
        self.pos = self.pos + move
        self.heading = math.atan2(move[1], move[0])
        self.step_count += 1
        self._check_triggers(prev)
        return True


@dataclass
class PhaseLog:
    trace: SensorTrace
    truth: np.ndarray           # (steps, 2) true position after each step
    step_times: np.ndarray
    recoveries: int


@dataclass
class SimResult:
    name: str
    pipeline: str
    outcome: str
    expected_outcome: str | None
    session: object
    phase_logs: list[PhaseLog]
    record: WayInRecord | None = None
    simplified: WayInRecord | None = None
    route: Route | None = None
    plan: object = None
    graph: RouteGraph | None = None
    wall_seconds: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def trace(self) -> SensorTrace:
        return self.phase_logs[-1].trace

    @property
    def truth(self) -> np.ndarray:
        return self.phase_logs[-1].truth


def _plan_from_doc(doc: dict):
    rooms = tuple(RoomSpec(r["room_id"], tuple(r["rect"]),
                           tuple(r["door_center"]), float(r.get("door_width", 1.0)))
                  for r in doc.get("rooms", ()))
    landmarks = tuple((l["name"], tuple(l["position"]), l["side"])
                      for l in doc.get("landmarks", ()))
    corridors = [(tuple(a), tuple(b)) for a, b in doc["corridors"]]
    return make_corridor_plan(corridors, float(doc.get("width", 2.0)),
                              rooms, landmarks)


def _ray_wall_distance(plan, origin, direction, max_dist: float) -> float | None:
    """Distance from origin to the first wall along a ray, else None."""
    walls = np.asarray(plan.walls, dtype=float)
    if walls.size == 0:
        return None
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    p = walls[:, 0, :]
    e = walls[:, 1, :] - p
    r = p - o
    det = d[1] * e[:, 0] - d[0] * e[:, 1]
    ok = np.abs(det) > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (e[:, 0] * r[:, 1] - e[:, 1] * r[:, 0]) / det
        u = (d[0] * r[:, 1] - d[1] * r[:, 0]) / det
    ok &= (t > 1e-9) & (u >= -1e-9) & (u <= 1.0 + 1e-9) & (t <= max_dist)
    if not np.any(ok):
        return None
    return float(t[ok].min())


def _excursions_from_doc(doc: dict) -> list[Excursion]:
    out = []
    for exc in doc.get("excursions", ()):
        out.append(Excursion(np.asarray(exc["trigger"], dtype=float),
                             [np.asarray(p, dtype=float) for p in exc["path"]]))
    return out


class _Gestures:
    """Scripted describe/repeat requests, fired at given step counts."""

    def __init__(self, doc: dict, session):
        self.pending = {int(g["at_step"]): str(g["gesture"])
                        for g in doc.get("gestures", ())}
        self.session = session
        self.log: list[dict] = []

    def poll(self, step_count: int, time_s: float) -> None:
        gesture = self.pending.pop(step_count, None)
        if gesture is None:
            return
        if gesture == "describe":
            text = self.session.describe_remaining()
        elif gesture == "repeat":
            text = self.session.repeat()
        else:
            raise ScenarioError(f"unknown gesture {gesture!r}")
        self.log.append({"at_step": step_count, "gesture": gesture,
                         "time_s": time_s, "text": text})


class _SensorFeed:
    """Turns true walker motion into noisy 25 Hz sensor rows."""

    def __init__(self, field_model: MagneticFieldModel, walker: _Walker,
                 rng: np.random.Generator, emit_velocity: bool,
                 velocity_scale: float, t0: float = 0.0):
        self.field = field_model
        self.walker = walker
        self.rng = rng
        self.emit_velocity = emit_velocity
        self.velocity_scale = velocity_scale
        self.tilt = math.radians(walker.model.device_tilt_deg)
        self.az_bias = 0.0
        self.rows_t: list[float] = []
        self.rows_az: list[float] = []
        self.rows_mag: list[np.ndarray] = []
        self.rows_grav: list[np.ndarray] = []
        self.rows_vel: list[np.ndarray] = []
        self.rows_step: list[int] = []
        self._last_step_sample: int | None = None
        self._last_step_t = t0
        self._last_step_pos = walker.pos.copy()

    def sample(self, t: float, stepped: bool) -> int:
        drift = math.radians(self.walker.model.azimuth_drift_deg_per_min) / 60.0
        self.az_bias += drift / SAMPLE_HZ
        az = wrap_angle(self.walker.heading + self.az_bias
                        + self.noise_azimuth())
        mag_world = self.field.field_at(self.walker.pos)
        m, g = device_vectors(mag_world, self.walker.heading, self.tilt)
        m = m + self.rng.normal(0.0, MAG_NOISE_UT, 3)
        g = g + self.rng.normal(0.0, GRAVITY_NOISE, 3)
        self.rows_t.append(t)
        self.rows_az.append(az)
        self.rows_mag.append(m)
        self.rows_grav.append(g)
        self.rows_vel.append(np.zeros(2))
        self.rows_step.append(1 if stepped else 0)
        idx = len(self.rows_t) - 1
        if stepped:
            self._backfill_velocity(idx, t)
        return idx

    def noise_azimuth(self) -> float:
        return self.walker.noise.azimuth_noise()

    def _backfill_velocity(self, idx: int, t: float) -> None:
        if self.emit_velocity:
            disp = self.walker.pos - self._last_step_pos
            dt = t - self._last_step_t
            v = (disp / dt) * self.velocity_scale if dt > 0 else np.zeros(2)
            start = 0 if self._last_step_sample is None else self._last_step_sample + 1
            for k in range(start, idx + 1):
                noise = self.rng.normal(0.0, VELOCITY_NOISE, 2)
                self.rows_vel[k] = v + noise
        self._last_step_sample = idx
        self._last_step_t = t
        self._last_step_pos = self.walker.pos.copy()

    def to_trace(self) -> SensorTrace:
        vel = np.vstack(self.rows_vel) if self.emit_velocity else None
        return SensorTrace(
            t=np.asarray(self.rows_t),
            azimuth=np.asarray(self.rows_az),
            magnetic=np.vstack(self.rows_mag),
            gravity=np.vstack(self.rows_grav),
            step_flag=np.asarray(self.rows_step, dtype=bool),
            velocity=vel,
        )


class ScenarioRunner:
    """Executes one scenario document end to end."""

    def __init__(self, doc: dict, seed: int | None = None):
        self.doc = doc
        self.name = doc.get("name", "scenario")
        self.pipeline = doc["pipeline"]
        self.seed = int(doc.get("seed", 0) if seed is None else seed)
        self.plan = _plan_from_doc(doc["plan"])
        self.graph = load_route_graph(doc["graph"]) if "graph" in doc else None
        self.field_model = field_model_from_document(doc.get("field", {}))
        self.walker_model = walker_from_document(doc.get("walker", {}))
        self.step_length_m = float(doc.get("step_length_m", 0.65))
        self.emit_velocity = bool(doc.get("velocity", False))
        self.velocity_scale = float(doc.get("velocity_scale", 1.0))
        self.config = self._build_config(doc)

    def _build_config(self, doc: dict) -> AppConfig:
        config = default_config()
        if "filter" in doc:
            merged = {**config.filter.to_document(), **doc["filter"]}
            config.filter = FilterConfig(**merged)
        if self.pipeline == "wayfinding":
            config.guidance = wayfinding_guidance(**doc.get("guidance", {}))
        else:
            config.guidance = backtracking_guidance(**doc.get("guidance", {}))
        return config

    def run(self) -> SimResult:
        t_start = time.perf_counter()
        if self.pipeline == "wayfinding":
            result = self._run_wayfinding()
        elif self.pipeline == "backtracking":
            result = self._run_backtracking()
        else:
            raise ScenarioError(f"unknown pipeline {self.pipeline!r}")
        result.wall_seconds = time.perf_counter() - t_start
        result.expected_outcome = self.doc.get("expected_outcome")
        return result

    def _drive(self, walker: _Walker, feed: _SensorFeed, rng: np.random.Generator,
               on_sample=None, on_step=None, hear=None,
               t0: float = 0.0) -> tuple[np.ndarray, np.ndarray, float]:
        """March the walker to completion, streaming sensors to callbacks."""
        t = t0
        dt = 1.0 / SAMPLE_HZ
        next_step = t + walker.noise.step_interval()
        last_step_t = t
        truth: list[np.ndarray] = []
        step_times: list[float] = []
        while not walker.done:
            t += dt
            stepped = False
            if t >= next_step:
                stepped = walker.step()
                next_step = t + walker.noise.step_interval()
                if stepped:
                    last_step_t = t
                    truth.append(walker.pos.copy())
                    step_times.append(t)
            if walker.done and not stepped:
                break
            idx = feed.sample(t, stepped)
            if on_sample is not None:
                on_sample(t, idx)
            if stepped and on_step is not None:
                notes = on_step(t, feed.rows_az[idx])
                if hear is not None and notes:
                    for note in notes:
                        if note.kind == "wrong-direction":
                            hear()
            if t - last_step_t > STUCK_LIMIT_S:
                raise ScenarioError("walker made no progress for 60 seconds")
            if walker.step_count > STEP_BUDGET:
                raise ScenarioError("walker exceeded the step budget")
        return (np.asarray(truth).reshape(-1, 2), np.asarray(step_times), t)

    def _run_wayfinding(self) -> SimResult:
        rng = np.random.default_rng(self.seed)
        start_id, goal_id = self.doc["route"]
        route = shortest_route(self.graph, start_id, goal_id)
        intent = [np.asarray(self.graph.waypoints[w], dtype=float)
                  for w in route.waypoint_ids]
        known_heading = math.atan2(intent[1][1] - intent[0][1],
                                   intent[1][0] - intent[0][0])
        targets = [p.copy() for p in intent[1:]]
        # A destination at a dead end is walked out to the wall itself, not
        # stopped at the waypoint: the position estimate trails the walker,
        # and the overshoot pulls it across the arrival radius.
        ends_at_wall = False
        leg = intent[-1] - intent[-2]
        leg_len = float(np.hypot(leg[0], leg[1]))
        if leg_len > 0:
            ahead = leg / leg_len
            hit = _ray_wall_distance(self.plan, intent[-1], ahead, 3.0)
            if hit is not None and hit > 0.45:
                targets[-1] = intent[-1] + (hit - 0.3) * ahead
                ends_at_wall = True
        walker = _Walker(self.walker_model, rng, intent[0], targets,
                         _excursions_from_doc(self.doc.get("script", {})))
        feed = _SensorFeed(self.field_model, walker, rng, self.emit_velocity,
                           self.velocity_scale)
        session = WayfindingSession(
            self.plan, self.graph, route, self.step_length_m, known_heading,
            self.config, seed=self.seed,
            velocity_multiplier=float(self.doc.get("velocity_multiplier", 1.0)),
            destination_ends_at_wall=ends_at_wall)

        gestures = _Gestures(self.doc.get("script", {}), session)

        def on_sample(t, idx):
            if session.velocity_mode:
                v = feed.rows_vel[idx]
                session.on_velocity_sample(t, v[0], v[1])

        def on_step(t, az):
            out = session.on_step(t, az)
            gestures.poll(walker.step_count, t)
            return out

        truth, step_times, _ = self._drive(
            walker, feed, rng, on_sample=on_sample, on_step=on_step,
            hear=walker.hear_wrong_direction)
        trace = feed.to_trace()
        goal = np.asarray(self.graph.waypoints[goal_id], dtype=float)
        outcome = self._classify(session.arrived, walker.pos, goal,
                                 session.guidance)
        return SimResult(self.name, self.pipeline, outcome, None, session,
                         [PhaseLog(trace, truth, step_times, walker.recoveries)],
                         route=route, plan=self.plan, graph=self.graph,
                         notes={"gestures": gestures.log})

    def _walk_open_loop(self, rng, start, targets, recorder=None,
                        t0: float = 0.0) -> PhaseLog:
        walker = _Walker(self.walker_model, rng, start, targets, [])
        feed = _SensorFeed(self.field_model, walker, rng, self.emit_velocity,
                           self.velocity_scale, t0=t0)

        def on_sample(t, idx):
            if recorder is not None:
                recorder.on_sample(t, feed.rows_mag[idx], feed.rows_grav[idx])

        def on_step(t, az):
            if recorder is not None:
                recorder.on_step(t, az)
            return None

        truth, step_times, _ = self._drive(walker, feed, rng,
                                           on_sample=on_sample, on_step=on_step,
                                           t0=t0)
        return PhaseLog(feed.to_trace(), truth, step_times, walker.recoveries)

    def _run_backtracking(self) -> SimResult:
        rng = np.random.default_rng(self.seed)
        way_in = [np.asarray(p, dtype=float) for p in self.doc["way_in"]]
        recorder = BacktrackRecorder(self.step_length_m)
        phase_a = self._walk_open_loop(rng, way_in[0], way_in[1:], recorder)
        record = recorder.finalize()
        simplified = simplify(record,
                              self.config.backtrack.simplify_radius_steps)

        script = self.doc.get("script", {})
        if "return_points" in script:
            ret_points = [np.asarray(p, dtype=float)
                          for p in script["return_points"]]
        else:
            ret_points = [p.copy() for p in reversed(way_in)]
        ret_start = ret_points[0]
        walker = _Walker(self.walker_model, rng, ret_start, ret_points[1:],
                         _excursions_from_doc(script))
        t0 = float(phase_a.trace.t[-1]) + 2.0
        feed = _SensorFeed(self.field_model, walker, rng, self.emit_velocity,
                           self.velocity_scale, t0=t0)
        session = BacktrackReturnSession(simplified,
                                         guidance_config=self.config.guidance,
                                         config=self.config,
                                         start_time_s=t0)

        gestures = _Gestures(script, session)

        def on_sample(t, idx):
            session.on_sample(t, feed.rows_mag[idx], feed.rows_grav[idx])

        def on_step(t, az):
            out = session.on_step(t, az)
            gestures.poll(walker.step_count, t)
            return out

        truth, step_times, _ = self._drive(
            walker, feed, rng, on_sample=on_sample, on_step=on_step,
            hear=walker.hear_wrong_direction, t0=t0)
        session.finish()
        trace = feed.to_trace()
        goal = way_in[0]
        arrived = session.arrived and not session.lost
        outcome = self._classify(arrived, walker.pos, goal, session.guidance)
        return SimResult(self.name, self.pipeline, outcome, None, session,
                         [phase_a,
                          PhaseLog(trace, truth, step_times, walker.recoveries)],
                         record=record, simplified=simplified, plan=self.plan,
                         notes={"gestures": gestures.log})

    @staticmethod
    def _classify(arrived: bool, true_pos: np.ndarray, goal: np.ndarray,
                  guidance_state) -> str:
        if not arrived:
            return OUTCOME_ABORTED
        if float(np.hypot(*(true_pos - goal))) > 3.0:
            return OUTCOME_MISLED
        warned = any(e.kind == "wrong-direction" and e.status == "emitted"
                     for e in guidance_state.log)
        return OUTCOME_BACKTRACKED if warned else OUTCOME_COMPLETED


def run_scenario(doc: dict, seed: int | None = None) -> SimResult:
    return ScenarioRunner(doc, seed).run()
