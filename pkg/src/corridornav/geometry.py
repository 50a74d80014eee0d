"""Floor-plan geometry: walls, rooms, landmarks, and the predicates used
by the localization filter.

All coordinates are metric, in the floor-plan frame. Wall crossing and
room membership are deliberately conservative: touching a wall endpoint
counts as a crossing, and polygon boundaries count as inside.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import GeometryError, PlanError


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Landmark:
    name: str
    position: Point2
    side: str  # "left" or "right" relative to the corridor's nominal direction


@dataclass(frozen=True)
class Room:
    room_id: str
    polygon: np.ndarray  # (M, 2) vertices, implicitly closed


@dataclass
class FloorPlan:
    walls: np.ndarray            # (W, 2, 2) segment endpoints
    rooms: list[Room] = field(default_factory=list)
    landmarks: list[Landmark] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.walls = np.asarray(self.walls, dtype=float).reshape(-1, 2, 2)
        if not np.isfinite(self.walls).all():
            raise PlanError("wall coordinates must be finite")
        # Cached endpoint views used by the vectorized predicates.
        self._wall_a = self.walls[:, 0, :]
        self._wall_b = self.walls[:, 1, :]
        self._wall_lo = np.minimum(self._wall_a, self._wall_b)
        self._wall_hi = np.maximum(self._wall_a, self._wall_b)

    @property
    def wall_count(self) -> int:
        return len(self.walls)

    @property
    def bounding_box(self) -> tuple[float, float, float, float]:
        pts = [self.walls.reshape(-1, 2)] if len(self.walls) else []
        pts += [r.polygon for r in self.rooms]
        pts += [np.asarray(l.position, dtype=float).reshape(1, 2) for l in self.landmarks]
        if not pts:
            return (0.0, 0.0, 0.0, 0.0)
        allp = np.vstack(pts)
        return (float(allp[:, 0].min()), float(allp[:, 1].min()),
                float(allp[:, 0].max()), float(allp[:, 1].max()))

    def to_document(self) -> dict:
        return {
            "units": "meters",
            "walls": [[[float(x) for x in p] for p in w] for w in self.walls],
            "rooms": [
                {"id": r.room_id, "polygon": [[float(x) for x in p] for p in r.polygon]}
                for r in self.rooms
            ],
            "landmarks": [
                {"name": l.name, "position": [float(l.position.x), float(l.position.y)],
                 "side": l.side}
                for l in self.landmarks
            ],
        }


def _orient(ax, ay, bx, by, px, py):
    """Signed area of triangle (a, b, p); broadcasts over numpy inputs."""
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _polygon_is_simple(poly: np.ndarray) -> bool:
    m = len(poly)
    if m < 3:
        return False
    closed = np.vstack([poly, poly[:1]])
    edges = [(closed[i], closed[i + 1]) for i in range(m)]
    for a, b in edges:
        if a[0] == b[0] and a[1] == b[1]:
            return False  # repeated vertex makes a zero-length edge
    for i in range(m):
        for j in range(i + 1, m):
            adjacent = (j == i + 1) or (i == 0 and j == m - 1)
            if adjacent:
                continue
            a, b = edges[i]
            c, d = edges[j]
            if _segments_touch(a, b, c, d):
                return False
    return True


def _segments_touch(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test for two scalar segments."""
    d1 = _orient(q1[0], q1[1], q2[0], q2[1], p1[0], p1[1])
    d2 = _orient(q1[0], q1[1], q2[0], q2[1], p2[0], p2[1])
    d3 = _orient(p1[0], p1[1], p2[0], p2[1], q1[0], q1[1])
    d4 = _orient(p1[0], p1[1], p2[0], p2[1], q2[0], q2[1])
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True

    def on_seg(a, b, p):
        return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))

    if d1 == 0 and on_seg(q1, q2, p1):
        return True
    if d2 == 0 and on_seg(q1, q2, p2):
        return True
    if d3 == 0 and on_seg(p1, p2, q1):
        return True
    if d4 == 0 and on_seg(p1, p2, q2):
        return True
    return False


def load_floor_plan(source: str | dict, allow_empty_walls: bool = False) -> FloorPlan:
    """Parse a floor-plan document (JSON text or an already-parsed dict).

    The document must declare metric units and may carry walls, rooms and
    landmarks. Room polygons must be simple. An empty wall list is only
    accepted when allow_empty_walls is set.
    """
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise PlanError(f"floor plan is not valid JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise PlanError("floor plan document must be a JSON object")
    units = doc.get("units", "meters")
    if units != "meters":
        raise PlanError(f"unsupported units {units!r}; only 'meters' is accepted")

    walls_raw = doc.get("walls", [])
    if not walls_raw and not allow_empty_walls:
        raise PlanError("floor plan has no walls (pass allow_empty_walls to accept)")
    try:
        walls = np.asarray(walls_raw, dtype=float).reshape(-1, 2, 2)
    except (ValueError, TypeError) as exc:
        raise PlanError(f"walls must be [[x, y], [x, y]] pairs: {exc}") from exc

    rooms: list[Room] = []
    for entry in doc.get("rooms", []):
        try:
            poly = np.asarray(entry["polygon"], dtype=float).reshape(-1, 2)
            room_id = str(entry["id"])
        except (KeyError, ValueError, TypeError) as exc:
            raise PlanError(f"bad room entry {entry!r}: {exc}") from exc
        if not np.isfinite(poly).all():
            raise PlanError(f"room {room_id!r} has non-finite vertices")
        if not _polygon_is_simple(poly):
            raise PlanError(f"room {room_id!r} polygon is not simple")
        rooms.append(Room(room_id, poly))

    landmarks: list[Landmark] = []
    for entry in doc.get("landmarks", []):
        try:
            name = str(entry["name"])
            pos = Point2(float(entry["position"][0]), float(entry["position"][1]))
            side = str(entry["side"])
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise PlanError(f"bad landmark entry {entry!r}: {exc}") from exc
        if side not in ("left", "right"):
            raise PlanError(f"landmark {name!r} side must be 'left' or 'right'")
        landmarks.append(Landmark(name, pos, side))

    return FloorPlan(walls=walls, rooms=rooms, landmarks=landmarks)


def dump_floor_plan(plan: FloorPlan) -> str:
    return json.dumps(plan.to_document(), indent=2)


def segments_cross_walls(p1: np.ndarray, p2: np.ndarray, plan: FloorPlan) -> np.ndarray:
    """Vectorized wall-crossing test for N movement segments.

    Returns a boolean array of shape (N,). Touching a wall anywhere,
    including endpoints and collinear overlap, counts as a crossing.
    Zero-length movements never cross.
    """
    p1 = np.asarray(p1, dtype=float).reshape(-1, 2)
    p2 = np.asarray(p2, dtype=float).reshape(-1, 2)
    n = len(p1)
    out = np.zeros(n, dtype=bool)
    if plan.wall_count == 0 or n == 0:
        return out

    # Prefilter: walls that cannot overlap the bounding box of the whole
    # batch of movement segments are excluded outright.
    lo = np.minimum(p1, p2)
    hi = np.maximum(p1, p2)
    batch_lo = lo.min(axis=0)
    batch_hi = hi.max(axis=0)
    near = ~((plan._wall_hi[:, 0] < batch_lo[0]) | (plan._wall_lo[:, 0] > batch_hi[0])
             | (plan._wall_hi[:, 1] < batch_lo[1]) | (plan._wall_lo[:, 1] > batch_hi[1]))
    if not near.any():
        return out
    wa = plan._wall_a[near]
    wb = plan._wall_b[near]
    wlo = plan._wall_lo[near]
    whi = plan._wall_hi[near]

    ax, ay = wa[:, 0][None, :], wa[:, 1][None, :]
    bx, by = wb[:, 0][None, :], wb[:, 1][None, :]
    px1, py1 = p1[:, 0][:, None], p1[:, 1][:, None]
    px2, py2 = p2[:, 0][:, None], p2[:, 1][:, None]

    d1 = _orient(ax, ay, bx, by, px1, py1)
    d2 = _orient(ax, ay, bx, by, px2, py2)
    d3 = _orient(px1, py1, px2, py2, ax, ay)
    d4 = _orient(px1, py1, px2, py2, bx, by)

    proper = (((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0))
              & (d1 != 0) & (d2 != 0) & (d3 != 0) & (d4 != 0))

    in_wall_box_1 = ((wlo[:, 0][None, :] <= px1) & (px1 <= whi[:, 0][None, :])
                     & (wlo[:, 1][None, :] <= py1) & (py1 <= whi[:, 1][None, :]))
    in_wall_box_2 = ((wlo[:, 0][None, :] <= px2) & (px2 <= whi[:, 0][None, :])
                     & (wlo[:, 1][None, :] <= py2) & (py2 <= whi[:, 1][None, :]))
    mlo_x = np.minimum(px1, px2)
    mhi_x = np.maximum(px1, px2)
    mlo_y = np.minimum(py1, py2)
    mhi_y = np.maximum(py1, py2)
    in_move_box_a = ((mlo_x <= ax) & (ax <= mhi_x) & (mlo_y <= ay) & (ay <= mhi_y))
    in_move_box_b = ((mlo_x <= bx) & (bx <= mhi_x) & (mlo_y <= by) & (by <= mhi_y))

    touch = (((d1 == 0) & in_wall_box_1) | ((d2 == 0) & in_wall_box_2)
             | ((d3 == 0) & in_move_box_a) | ((d4 == 0) & in_move_box_b))

    hits = (proper | touch).any(axis=1)
    degenerate = (p1[:, 0] == p2[:, 0]) & (p1[:, 1] == p2[:, 1])
    return hits & ~degenerate


def segment_crosses_wall(a, b, plan: FloorPlan) -> bool:
    """True when the movement from a to b touches or crosses any wall."""
    return bool(segments_cross_walls(np.asarray(a, dtype=float)[None, :],
                                     np.asarray(b, dtype=float)[None, :], plan)[0])


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd membership test for N points; boundary points count as inside."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    poly = np.asarray(polygon, dtype=float).reshape(-1, 2)
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    boundary = np.zeros(len(pts), dtype=bool)
    m = len(poly)
    for k in range(m):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % m]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        on_line = cross == 0
        if on_line.any():
            in_box = ((np.minimum(ax, bx) <= px) & (px <= np.maximum(ax, bx))
                      & (np.minimum(ay, by) <= py) & (py <= np.maximum(ay, by)))
            boundary |= on_line & in_box
        straddles = (ay > py) != (by > py)
        if straddles.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                x_int = ax + (py - ay) * (bx - ax) / (by - ay)
            inside ^= straddles & (px < x_int)
    return inside | boundary


def point_in_room(p, plan: FloorPlan) -> str | None:
    """Return the id of the first room containing p (boundary inclusive)."""
    pt = np.asarray(p, dtype=float).reshape(1, 2)
    for room in plan.rooms:
        if points_in_polygon(pt, room.polygon)[0]:
            return room.room_id
    return None


def points_in_any_room(points: np.ndarray, plan: FloorPlan) -> np.ndarray:
    """Boolean mask of points lying inside at least one room polygon."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    mask = np.zeros(len(pts), dtype=bool)
    for room in plan.rooms:
        remaining = ~mask
        if not remaining.any():
            break
        mask[remaining] = points_in_polygon(pts[remaining], room.polygon)
    return mask


def project_to_segment(p, a, b) -> tuple[np.ndarray, float]:
    """Project p onto segment ab; returns (nearest point, clamped parameter)."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    den = float(d @ d)
    if den == 0.0:
        raise GeometryError("cannot project onto a zero-length segment")
    t = float(np.clip((p - a) @ d / den, 0.0, 1.0))
    return a + t * d, t
