"""Notification policy for both navigation pipelines.

Four notification families are produced: an imminent-event announcement
when a turn, a straight crossing or the destination is close ahead; a
segment-entry briefing with the distance to walk; a wrong-direction
warning; and landmark callouts. Only the imminent turn announcement is
time-critical: it preempts ongoing speech and carries a chime and a
vibration cue. Anything else that triggers while speech is playing is
dropped, never queued. No message repeats for the same anchor, except
the wrong-direction warning which re-arms at every further threshold of
divergence.

All text templates are fixed; distances are spoken in meters, feet or
steps according to the user preference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .route_graph import LandmarkAnnouncement, RouteLeg

FEET_PER_METER = 1.0 / 0.3048
SPEECH_SECONDS_PER_CHAR = 0.06

WAYFINDING = "wayfinding"
BACKTRACKING = "backtracking"

TURN_AHEAD_TEXT = "At the upcoming {junction} junction, turn {direction}."
TURN_AHEAD_TEXT_NO_JUNCTION = "At the upcoming junction, turn {direction}."
STRAIGHT_TEXT = "Keep walking straight."
DESTINATION_TEXT = "Approaching your destination. Your destination is just ahead of you."
DESTINATION_WALL_TEXT = " Please stop when you find a wall."
SEGMENT_TEXT = "Walk straight for about {count} {units}."
SEGMENT_NEXT_TURN_TEXT = " Then, you will turn {direction}."
KEEP_SIDE_TEXT = "Please keep to the {side}. "
WRONG_DIRECTION_TEXT = ("You are walking in the wrong direction. "
                        "Please turn around and start walking again.")
LANDMARK_TEXT = "Landmark nearby. {name} to the {side}."
START_TEXT = "Please start walking."
ARRIVED_TEXT = "You have arrived."


@dataclass
class GuidanceConfig:
    pipeline: str = WAYFINDING
    units: str = "meters"            # meters | feet | steps
    turn_ahead_m: float = 7.0
    turn_ahead_steps: float = 14.0
    wrong_direction_m: float = 4.5
    wrong_direction_steps: float = 16.0
    landmark_radius_m: float = 2.0
    announce_next_turn: bool = True
    speech_seconds_per_char: float = SPEECH_SECONDS_PER_CHAR
    arrival_m: float = 1.0
    arrival_steps: float = 2.0
    footstep_tick: bool = True

    def __post_init__(self) -> None:
        if self.pipeline not in (WAYFINDING, BACKTRACKING):
            raise ValueError(f"unknown pipeline {self.pipeline!r}")
        if self.units not in ("meters", "feet", "steps"):
            raise ValueError(f"unknown units {self.units!r}")

    @property
    def turn_ahead_threshold(self) -> float:
        return self.turn_ahead_m if self.pipeline == WAYFINDING else self.turn_ahead_steps

    @property
    def wrong_direction_threshold(self) -> float:
        return (self.wrong_direction_m if self.pipeline == WAYFINDING
                else self.wrong_direction_steps)

    @property
    def arrival_threshold(self) -> float:
        return self.arrival_m if self.pipeline == WAYFINDING else self.arrival_steps

    def to_document(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "units": self.units,
            "turn_ahead_m": self.turn_ahead_m,
            "turn_ahead_steps": self.turn_ahead_steps,
            "wrong_direction_m": self.wrong_direction_m,
            "wrong_direction_steps": self.wrong_direction_steps,
            "landmark_radius_m": self.landmark_radius_m,
            "announce_next_turn": self.announce_next_turn,
            "speech_seconds_per_char": self.speech_seconds_per_char,
            "arrival_m": self.arrival_m,
            "arrival_steps": self.arrival_steps,
            "footstep_tick": self.footstep_tick,
        }


def wayfinding_guidance(**overrides) -> GuidanceConfig:
    return GuidanceConfig(pipeline=WAYFINDING, announce_next_turn=True, **overrides)


def backtracking_guidance(**overrides) -> GuidanceConfig:
    overrides.setdefault("announce_next_turn", False)
    return GuidanceConfig(pipeline=BACKTRACKING, **overrides)


@dataclass(frozen=True)
class Notification:
    kind: str                # turn-ahead | straight-ahead | destination |
    text: str                # new-segment | wrong-direction | landmark | start
    time_s: float
    anchor: tuple
    time_critical: bool = False
    chime: bool = False
    vibrate: bool = False


class LogEntry(NamedTuple):
    time_s: float
    kind: str
    text: str
    status: str              # emitted | dropped | preempted


@dataclass
class SegmentEntry:
    anchor: str
    length_m: float
    keep_side: str | None = None
    next_turn_direction: str | None = None
    length_steps: float | None = None


@dataclass
class GuidanceContext:
    time_s: float
    distance_to_next: float | None = None   # meters or steps, per pipeline
    next_kind: str | None = None             # turn | straight | destination
    next_turn_direction: str | None = None
    junction_token: str | None = None
    next_anchor: str = ""
    destination_ends_at_wall: bool = False
    segment_entered: SegmentEntry | None = None
    wrong_direction_accum: float = 0.0
    landmarks: list[LandmarkAnnouncement] = field(default_factory=list)
    at_destination: bool = False
    step_length_m: float = 0.5


@dataclass
class GuidanceState:
    started: bool = False
    speaking_until: float = -math.inf
    current: Notification | None = None
    last_emitted: Notification | None = None
    issued: set = field(default_factory=set)
    wrong_direction_level: int = 0
    log: list[LogEntry] = field(default_factory=list)

    def speaking(self, t: float) -> bool:
        return t < self.speaking_until


def spoken_count(length_m: float, units: str, step_length_m: float,
                 length_steps: float | None = None) -> int:
    """Distance in the preferred units, rounded half up."""
    if units == "meters":
        value = length_m
    elif units == "feet":
        value = length_m * FEET_PER_METER
    elif units == "steps":
        value = length_steps if length_steps is not None else length_m / step_length_m
    else:
        raise ValueError(f"unknown units {units!r}")
    return int(math.floor(value + 0.5))


def speech_duration(text: str, seconds_per_char: float = SPEECH_SECONDS_PER_CHAR) -> float:
    return seconds_per_char * len(text)


def segment_entry_message(entry: SegmentEntry, config: GuidanceConfig,
                          step_length_m: float = 0.5) -> str:
    count = spoken_count(entry.length_m, config.units, step_length_m, entry.length_steps)
    text = SEGMENT_TEXT.format(count=count, units=config.units)
    if config.announce_next_turn and entry.next_turn_direction:
        text += SEGMENT_NEXT_TURN_TEXT.format(direction=entry.next_turn_direction)
    if entry.keep_side:
        text = KEEP_SIDE_TEXT.format(side=entry.keep_side) + text
    return text


def describe_route(legs: list[RouteLeg], units: str, step_length_m: float) -> str:
    """On-demand spoken overview of what remains of the route."""
    if not legs:
        return ARRIVED_TEXT
    clauses: list[str] = []
    for leg in legs:
        count = spoken_count(leg.length, units, step_length_m)
        clauses.append(f"walk {count} {units}")
        if leg.turn and leg.turn != "straight":
            clauses.append(f"then turn {leg.turn}")
    clauses.append("then arrive at destination")
    text = ", ".join(clauses) + "."
    return text[0].upper() + text[1:]


def repeat_last(state: GuidanceState) -> str:
    """Text of the most recent emitted notification; empty if none yet."""
    return state.last_emitted.text if state.last_emitted else ""


def _type1_candidate(ctx: GuidanceContext, config: GuidanceConfig) -> Notification | None:
    if ctx.distance_to_next is None or ctx.next_kind is None:
        return None
    if ctx.distance_to_next >= config.turn_ahead_threshold:
        return None
    anchor = ("approach", ctx.next_anchor)
    if ctx.next_kind == "turn":
        if config.pipeline == WAYFINDING and ctx.junction_token:
            text = TURN_AHEAD_TEXT.format(junction=ctx.junction_token,
                                          direction=ctx.next_turn_direction)
        else:
            text = TURN_AHEAD_TEXT_NO_JUNCTION.format(direction=ctx.next_turn_direction)
        return Notification("turn-ahead", text, ctx.time_s, anchor,
                            time_critical=True, chime=True, vibrate=True)
    if ctx.next_kind == "straight":
        return Notification("straight-ahead", STRAIGHT_TEXT, ctx.time_s, anchor)
    if ctx.next_kind == "destination":
        text = DESTINATION_TEXT
        if ctx.destination_ends_at_wall:
            text += DESTINATION_WALL_TEXT
        return Notification("destination", text, ctx.time_s, anchor)
    raise ValueError(f"unknown approach kind {ctx.next_kind!r}")


def on_update(ctx: GuidanceContext, state: GuidanceState,
              config: GuidanceConfig) -> list[Notification]:
    """Evaluate all triggers for one position update.

    Returns the notifications actually emitted; everything that
    triggered but could not play is logged as dropped (and its anchor is
    consumed) or, for the message it displaced, as preempted.
    """
    candidates: list[Notification] = []
    if not state.started:
        state.started = True
        candidates.append(Notification("start", START_TEXT, ctx.time_s, ("start",)))

    c1 = _type1_candidate(ctx, config)
    if c1 is not None:
        candidates.append(c1)

    if ctx.segment_entered is not None:
        entry = ctx.segment_entered
        candidates.append(Notification(
            "new-segment", segment_entry_message(entry, config, ctx.step_length_m),
            ctx.time_s, ("segment", entry.anchor)))

    threshold = config.wrong_direction_threshold
    if ctx.wrong_direction_accum < threshold:
        state.wrong_direction_level = 0
    else:
        level = int(ctx.wrong_direction_accum // threshold)
        if level > state.wrong_direction_level:
            state.wrong_direction_level = level
            candidates.append(Notification(
                "wrong-direction", WRONG_DIRECTION_TEXT, ctx.time_s,
                ("wrong-direction", level)))

    for lm in ctx.landmarks:
        if lm.distance < config.landmark_radius_m:
            candidates.append(Notification(
                "landmark",
                LANDMARK_TEXT.format(name=lm.name.capitalize(), side=lm.side),
                ctx.time_s, ("landmark", lm.name)))

    emitted: list[Notification] = []
    for cand in candidates:
        if cand.anchor in state.issued:
            continue
        if state.speaking(ctx.time_s):
            if cand.time_critical:
                if state.current is not None:
                    state.log.append(LogEntry(ctx.time_s, state.current.kind,
                                              state.current.text, "preempted"))
                _emit(cand, state, config)
                emitted.append(cand)
            else:
                state.issued.add(cand.anchor)
                state.log.append(LogEntry(ctx.time_s, cand.kind, cand.text, "dropped"))
        else:
            _emit(cand, state, config)
            emitted.append(cand)
    return emitted


def _emit(notification: Notification, state: GuidanceState,
          config: GuidanceConfig) -> None:
    state.issued.add(notification.anchor)
    state.current = notification
    state.last_emitted = notification
    state.speaking_until = notification.time_s + speech_duration(
        notification.text, config.speech_seconds_per_char)
    state.log.append(LogEntry(notification.time_s, notification.kind,
                              notification.text, "emitted"))
