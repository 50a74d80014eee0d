"""Waypoint graph over the floor plan: routing, segment association and
landmark lookup.

Waypoints sit at corridor junctions; segments are straight corridor
spans between them. Segment association carries hysteresis: near a
junction the association is released, and it is only re-acquired once
the position projects clearly onto one of the incident segments.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import PlanError, RouteError
from .geometry import FloorPlan, Point2, project_to_segment

ASSOCIATION_RELEASE_DISTANCE_M = 1.5

STRAIGHT_HALF_ANGLE = math.radians(45.0)


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def turn_word(angle: float) -> str:
    """Bin a signed heading change into 'left', 'right' or 'straight'."""
    if abs(angle) < STRAIGHT_HALF_ANGLE:
        return "straight"
    return "left" if angle > 0 else "right"


@dataclass(frozen=True)
class RouteSegment:
    index: int
    a: str
    b: str
    length: float
    keep_side: str | None = None

    def other(self, waypoint_id: str) -> str:
        if waypoint_id == self.a:
            return self.b
        if waypoint_id == self.b:
            return self.a
        raise RouteError(f"waypoint {waypoint_id!r} is not an endpoint of segment {self.index}")


class RouteGraph:
    def __init__(self, waypoints: dict[str, Point2], segments: list[RouteSegment]):
        self.waypoints = waypoints
        self.segments = segments
        self._adjacent: dict[str, list[int]] = {w: [] for w in waypoints}
        self._by_pair: dict[tuple[str, str], int] = {}
        for seg in segments:
            self._adjacent[seg.a].append(seg.index)
            self._adjacent[seg.b].append(seg.index)
            self._by_pair[(seg.a, seg.b)] = seg.index
            self._by_pair[(seg.b, seg.a)] = seg.index

    def incident(self, waypoint_id: str) -> list[int]:
        return self._adjacent[waypoint_id]

    def degree(self, waypoint_id: str) -> int:
        return len(self._adjacent[waypoint_id])

    def segment_between(self, a: str, b: str) -> int:
        try:
            return self._by_pair[(a, b)]
        except KeyError:
            raise RouteError(f"no segment joins {a!r} and {b!r}") from None

    def endpoints(self, segment_index: int) -> tuple[np.ndarray, np.ndarray]:
        seg = self.segments[segment_index]
        return (np.asarray(self.waypoints[seg.a], dtype=float),
                np.asarray(self.waypoints[seg.b], dtype=float))

    def direction(self, from_id: str, to_id: str) -> float:
        p = self.waypoints[from_id]
        q = self.waypoints[to_id]
        return math.atan2(q.y - p.y, q.x - p.x)

    def to_document(self) -> dict:
        return {
            "waypoints": [
                {"id": w, "position": [float(p.x), float(p.y)]}
                for w, p in self.waypoints.items()
            ],
            "edges": [
                {"a": s.a, "b": s.b, **({"keep_side": s.keep_side} if s.keep_side else {})}
                for s in self.segments
            ],
        }


def load_route_graph(source: str | dict) -> RouteGraph:
    """Parse the waypoint graph embedded in a floor-plan document."""
    doc = json.loads(source) if isinstance(source, str) else source
    waypoints: dict[str, Point2] = {}
    for entry in doc.get("waypoints", []):
        try:
            wid = str(entry["id"])
            pos = Point2(float(entry["position"][0]), float(entry["position"][1]))
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise PlanError(f"bad waypoint entry {entry!r}: {exc}") from exc
        if wid in waypoints:
            raise PlanError(f"duplicate waypoint id {wid!r}")
        waypoints[wid] = pos
    segments: list[RouteSegment] = []
    seen_pairs: set[tuple[str, str]] = set()
    for entry in doc.get("edges", []):
        try:
            a, b = str(entry["a"]), str(entry["b"])
        except (KeyError, TypeError) as exc:
            raise PlanError(f"bad edge entry {entry!r}: {exc}") from exc
        keep = entry.get("keep_side")
        if keep not in (None, "left", "right"):
            raise PlanError(f"edge {a!r}-{b!r} keep_side must be 'left' or 'right'")
        if a not in waypoints or b not in waypoints:
            raise PlanError(f"edge {a!r}-{b!r} references an unknown waypoint")
        if a == b:
            raise PlanError(f"edge {a!r}-{b!r} is a self loop")
        key = (min(a, b), max(a, b))
        if key in seen_pairs:
            raise PlanError(f"duplicate edge {a!r}-{b!r}")
        seen_pairs.add(key)
        pa, pb = waypoints[a], waypoints[b]
        length = math.hypot(pb.x - pa.x, pb.y - pa.y)
        if length == 0.0:
            raise PlanError(f"edge {a!r}-{b!r} has zero length")
        segments.append(RouteSegment(len(segments), a, b, length, keep))
    return RouteGraph(waypoints, segments)


@dataclass(frozen=True)
class Route:
    waypoint_ids: list[str]
    turns: list[str]      # one entry per interior waypoint: left/right/straight
    length: float

    @property
    def start(self) -> str:
        return self.waypoint_ids[0]

    @property
    def goal(self) -> str:
        return self.waypoint_ids[-1]

    def segment_pairs(self) -> list[tuple[str, str]]:
        ids = self.waypoint_ids
        return [(ids[i], ids[i + 1]) for i in range(len(ids) - 1)]

    def to_document(self) -> dict:
        return {"waypoints": list(self.waypoint_ids), "turns": list(self.turns),
                "length_m": float(self.length)}


def shortest_route(graph: RouteGraph, start: str, goal: str) -> Route:
    """Metric shortest path; ties broken by the smallest waypoint-id sequence."""
    if start not in graph.waypoints or goal not in graph.waypoints:
        raise RouteError("start or goal waypoint is not in the graph")
    if start == goal:
        return Route([start], [], 0.0)
    best: dict[str, tuple[float, tuple[str, ...]]] = {}
    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (start,))]
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node in best:
            continue
        best[node] = (dist, path)
        if node == goal:
            break
        for seg_idx in graph.incident(node):
            seg = graph.segments[seg_idx]
            nxt = seg.other(node)
            if nxt in best:
                continue
            heapq.heappush(heap, (dist + seg.length, path + (nxt,)))
    if goal not in best:
        raise RouteError(f"no route from {start!r} to {goal!r}")
    dist, path = best[goal]
    turns = []
    for k in range(1, len(path) - 1):
        h_in = graph.direction(path[k - 1], path[k])
        h_out = graph.direction(path[k], path[k + 1])
        turns.append(turn_word(wrap_angle(h_out - h_in)))
    return Route(list(path), turns, dist)


def junction_kind(graph: RouteGraph, waypoint_id: str, incoming_segment: int) -> str:
    """Describe a junction as seen when arriving along the given segment.

    Returns one of 'endpoint', 'straight', 'left-L', 'right-L', 'T', 'X'.
    """
    if incoming_segment not in graph.incident(waypoint_id):
        raise RouteError(f"segment {incoming_segment} does not reach {waypoint_id!r}")
    degree = graph.degree(waypoint_id)
    if degree == 1:
        return "endpoint"
    if degree == 3:
        return "T"
    if degree >= 4:
        return "X"
    other = next(i for i in graph.incident(waypoint_id) if i != incoming_segment)
    seg_in = graph.segments[incoming_segment]
    seg_out = graph.segments[other]
    h_in = graph.direction(seg_in.other(waypoint_id), waypoint_id)
    h_out = graph.direction(waypoint_id, seg_out.other(waypoint_id))
    word = turn_word(wrap_angle(h_out - h_in))
    if word == "straight":
        return "straight"
    return f"{word}-L"


@dataclass(frozen=True)
class SegmentAssociation:
    """Hysteretic binding of a position estimate to one graph segment."""
    segment: int | None
    point: np.ndarray | None
    junction: str | None = None

    @property
    def state(self) -> str:
        return "associated" if self.segment is not None else "ambiguous"


def initial_association(graph: RouteGraph, p) -> SegmentAssociation:
    """Bind to the globally nearest segment; used once at session start."""
    p = np.asarray(p, dtype=float)
    best_idx, best_q, best_d = None, None, math.inf
    for seg in graph.segments:
        a, b = graph.endpoints(seg.index)
        q, _ = project_to_segment(p, a, b)
        d = float(np.hypot(*(p - q)))
        if d < best_d:
            best_idx, best_q, best_d = seg.index, q, d
    if best_idx is None:
        raise RouteError("graph has no segments")
    return SegmentAssociation(best_idx, best_q)


def associate(assoc: SegmentAssociation, p, graph: RouteGraph,
              threshold: float = ASSOCIATION_RELEASE_DISTANCE_M) -> SegmentAssociation:
    """Advance the association state machine for a new position estimate.

    Associated state is released when the projection comes within
    `threshold` of a junction that has other incident segments; it is
    re-acquired once the position projects at least `threshold` away
    from that junction along some incident segment.
    """
    p = np.asarray(p, dtype=float)
    if assoc.segment is not None:
        seg = graph.segments[assoc.segment]
        a, b = graph.endpoints(assoc.segment)
        q, _ = project_to_segment(p, a, b)
        release_at = None
        release_d = threshold
        for wid in (seg.a, seg.b):
            if graph.degree(wid) < 2:
                continue
            w = np.asarray(graph.waypoints[wid], dtype=float)
            d = float(np.hypot(*(q - w)))
            if d < release_d:
                release_at, release_d = wid, d
        if release_at is not None:
            return SegmentAssociation(None, None, release_at)
        return replace(assoc, point=q)

    if assoc.junction is None:
        return initial_association(graph, p)
    w = np.asarray(graph.waypoints[assoc.junction], dtype=float)
    best: tuple[float, int, np.ndarray] | None = None
    for seg_idx in graph.incident(assoc.junction):
        a, b = graph.endpoints(seg_idx)
        q, _ = project_to_segment(p, a, b)
        if float(np.hypot(*(q - w))) < threshold:
            continue
        d_p = float(np.hypot(*(p - q)))
        if best is None or d_p < best[0]:
            best = (d_p, seg_idx, q)
    if best is None:
        return assoc
    return SegmentAssociation(best[1], best[2], None)


class RouteLeg(NamedTuple):
    length: float
    turn: str | None        # turn word at the far end; None at the destination
    waypoint_id: str        # waypoint at the far end of this leg


class RemainingRoute(NamedTuple):
    distance_to_next: float
    next_waypoint: str
    legs: list[RouteLeg]


def remaining_route(route: Route, graph: RouteGraph,
                    assoc: SegmentAssociation, p=None) -> RemainingRoute:
    """Distance to the next route waypoint plus the legs still ahead.

    While the association is ambiguous near a junction, the junction
    itself stands in for the position, which keeps the reported distance
    monotone through the junction. A fully unassociated state is an error.
    """
    ids = route.waypoint_ids
    if assoc.segment is not None:
        pair_idx = None
        seg = graph.segments[assoc.segment]
        for k, (a, b) in enumerate(route.segment_pairs()):
            if {a, b} == {seg.a, seg.b}:
                pair_idx = k
                break
        if pair_idx is None:
            raise RouteError("associated segment is not part of the route")
        next_wp = ids[pair_idx + 1]
        q = assoc.point
        w = np.asarray(graph.waypoints[next_wp], dtype=float)
        dist = float(np.hypot(*(q - w)))
        start_leg = pair_idx + 1
    elif assoc.junction is not None:
        if assoc.junction not in ids:
            raise RouteError("ambiguous at a junction that is not on the route")
        j = ids.index(assoc.junction)
        if j == 0:
            next_wp = ids[1] if len(ids) > 1 else ids[0]
            w0 = np.asarray(graph.waypoints[ids[0]], dtype=float)
            w1 = np.asarray(graph.waypoints[next_wp], dtype=float)
            dist = float(np.hypot(*(w1 - w0)))
            start_leg = 1
        else:
            next_wp = assoc.junction
            dist = 0.0
            start_leg = j
    else:
        raise RouteError("association is not bound to any segment or junction")

    legs: list[RouteLeg] = []
    turn_at = {ids[k + 1]: route.turns[k] for k in range(len(route.turns))}
    legs.append(RouteLeg(dist, turn_at.get(next_wp), next_wp))
    k = start_leg
    while k < len(ids) - 1:
        a, b = ids[k], ids[k + 1]
        seg_idx = graph.segment_between(a, b)
        legs.append(RouteLeg(graph.segments[seg_idx].length, turn_at.get(b), b))
        k += 1
    return RemainingRoute(dist, next_wp, legs)


class LandmarkAnnouncement(NamedTuple):
    name: str
    side: str
    distance: float
    text: str


def nearby_landmarks(p, plan: FloorPlan, heading: float | None = None,
                     radius: float = 2.0,
                     announced: set[str] | frozenset[str] = frozenset()
                     ) -> list[LandmarkAnnouncement]:
    """Landmarks within radius of p, nearest first, with their side.

    The side is resolved against the walking direction when a heading is
    given; otherwise the annotated side from the floor plan is used.
    """
    p = np.asarray(p, dtype=float)
    found = []
    for lm in plan.landmarks:
        if lm.name in announced:
            continue
        lp = np.asarray(lm.position, dtype=float)
        d = float(np.hypot(*(lp - p)))
        if d >= radius:
            continue
        side = lm.side
        if heading is not None:
            hx, hy = math.cos(heading), math.sin(heading)
            cross = hx * (lp[1] - p[1]) - hy * (lp[0] - p[0])
            if cross != 0.0:
                side = "left" if cross > 0 else "right"
        found.append(LandmarkAnnouncement(lm.name, side, d, f"{lm.name} to the {side}"))
    found.sort(key=lambda a: (a.distance, a.name))
    return found
