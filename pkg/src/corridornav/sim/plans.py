"""Floor plan construction from axis-aligned corridor centerlines.

Corridors are rectangles around their centerlines; the walls are the
boundary of the union of all rectangles. The union boundary is found on
a compressed grid: every rectangle edge coordinate becomes a grid line,
each cell is either inside or outside, and walls are the elementary
edges where coverage flips. Rooms are extra rectangles attached to a
corridor; the shared boundary becomes a wall with a door gap left open.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PlanError
from ..geometry import FloorPlan, Landmark, Point2, Room

_EPS = 1e-9


@dataclass(frozen=True)
class RoomSpec:
    room_id: str
    rect: tuple[float, float, float, float]      # x0, y0, x1, y1
    door_center: tuple[float, float]             # point on the room boundary
    door_width: float = 1.0


def _corridor_rect(a, b, width: float) -> tuple[float, float, float, float]:
    x0, x1 = sorted((float(a[0]), float(b[0])))
    y0, y1 = sorted((float(a[1]), float(b[1])))
    if x0 != x1 and y0 != y1:
        raise PlanError("corridor centerlines must be axis-aligned")
    h = width / 2.0
    return (x0 - h, y0 - h, x1 + h, y1 + h)


def _covers(rect, mx: float, my: float) -> bool:
    return rect[0] < mx < rect[2] and rect[1] < my < rect[3]


def _merge_collinear(walls: list[tuple[float, float, float, float]]) -> list:
    """Join touching collinear wall pieces into maximal segments."""
    vertical = sorted(w for w in walls if w[0] == w[2])
    horizontal = sorted((w[1], w[0], w[3], w[2]) for w in walls if w[1] == w[3])
    merged = []
    for group, flip in ((vertical, False), (horizontal, True)):
        run = None
        for w in group:
            if run is not None and w[0] == run[0] and abs(w[1] - run[3]) < _EPS:
                run = (run[0], run[1], run[2], w[3])
            else:
                if run is not None:
                    merged.append((run, flip))
                run = w
        if run is not None:
            merged.append((run, flip))
    out = []
    for (c, a0, _, a1), flip in merged:
        if flip:
            out.append(((a0, c), (a1, c)))
        else:
            out.append(((c, a0), (c, a1)))
    return out


def _union_boundary(rects) -> list[tuple[float, float, float, float]]:
    """Elementary boundary edges of a union of axis-aligned rectangles."""
    xs = sorted({v for r in rects for v in (r[0], r[2])})
    ys = sorted({v for r in rects for v in (r[1], r[3])})
    nx, ny = len(xs) - 1, len(ys) - 1
    covered = np.zeros((nx, ny), dtype=bool)
    for i in range(nx):
        mx = 0.5 * (xs[i] + xs[i + 1])
        for j in range(ny):
            my = 0.5 * (ys[j] + ys[j + 1])
            covered[i, j] = any(_covers(r, mx, my) for r in rects)

    def cov(i: int, j: int) -> bool:
        return bool(covered[i, j]) if 0 <= i < nx and 0 <= j < ny else False

    edges = []
    for i in range(nx + 1):
        for j in range(ny):
            if cov(i - 1, j) != cov(i, j):
                edges.append((xs[i], ys[j], xs[i], ys[j + 1]))
    for j in range(ny + 1):
        for i in range(nx):
            if cov(i, j - 1) != cov(i, j):
                edges.append((xs[i], ys[j], xs[i + 1], ys[j]))
    return edges


def _in_door(room: RoomSpec, x0, y0, x1, y1) -> bool:
    cx, cy = room.door_center
    half = room.door_width / 2.0
    if abs(x0 - x1) < _EPS:                       # vertical edge
        if abs(x0 - cx) > _EPS:
            return False
        my = 0.5 * (y0 + y1)
        return cy - half - _EPS < my < cy + half + _EPS
    if abs(y0 - y1) < _EPS:                       # horizontal edge
        if abs(y0 - cy) > _EPS:
            return False
        mx = 0.5 * (x0 + x1)
        return cx - half - _EPS < mx < cx + half + _EPS
    return False


def make_corridor_plan(corridors, width: float = 2.0,
                       rooms: tuple[RoomSpec, ...] = (),
                       landmarks: tuple[tuple[str, tuple[float, float], str], ...] = (),
                       shell_offset_m: float = 0.35) -> FloorPlan:
    if not corridors:
        raise PlanError("need at least one corridor centerline")
    corridor_rects = [_corridor_rect(a, b, width) for a, b in corridors]
    room_rects = {r.room_id: tuple(map(float, r.rect)) for r in rooms}
    all_rects = corridor_rects + list(room_rects.values())

    xs = {v for r in all_rects for v in (r[0], r[2])}
    ys = {v for r in all_rects for v in (r[1], r[3])}
    for room in rooms:
        cx, cy = room.door_center
        half = room.door_width / 2.0
        xs.update((cx - half, cx + half))
        ys.update((cy - half, cy + half))
    xs = sorted(xs)
    ys = sorted(ys)

    nx, ny = len(xs) - 1, len(ys) - 1
    covered = np.zeros((nx, ny), dtype=bool)
    in_room = np.zeros((nx, ny), dtype=bool)
    for i in range(nx):
        mx = 0.5 * (xs[i] + xs[i + 1])
        for j in range(ny):
            my = 0.5 * (ys[j] + ys[j + 1])
            covered[i, j] = any(_covers(r, mx, my) for r in all_rects)
            in_room[i, j] = any(_covers(r, mx, my) for r in room_rects.values())

    def cell(i: int, j: int) -> tuple[bool, bool]:
        if 0 <= i < nx and 0 <= j < ny:
            return bool(covered[i, j]), bool(in_room[i, j])
        return False, False

    walls: list[tuple[float, float, float, float]] = []

    def consider(edge, side_a, side_b):
        cov_a, room_a = side_a
        cov_b, room_b = side_b
        if cov_a != cov_b:
            walls.append(edge)
            return
        if cov_a and (room_a != room_b):
            # Interface between a room and a corridor: wall except the door.
            if not any(_in_door(r, *edge) for r in rooms):
                walls.append(edge)

    for i in range(nx + 1):
        for j in range(ny):
            consider((xs[i], ys[j], xs[i], ys[j + 1]), cell(i - 1, j), cell(i, j))
    for j in range(ny + 1):
        for i in range(nx):
            consider((xs[i], ys[j], xs[i + 1], ys[j]), cell(i, j - 1), cell(i, j))

    if shell_offset_m > 0:
        # Building shell: a second boundary ring offset outward. The thin
        # band behind each wall stays enclosed, so a position nudged just
        # past a wall is trapped between two walls instead of facing open
        # unbounded space.
        t = float(shell_offset_m)
        shell = [(r[0] - t, r[1] - t, r[2] + t, r[3] + t) for r in all_rects]
        walls.extend(_union_boundary(shell))

    wall_pairs = _merge_collinear(walls)
    room_objs = []
    for room in rooms:
        x0, y0, x1, y1 = room_rects[room.room_id]
        room_objs.append(Room(room.room_id, [Point2(x0, y0), Point2(x1, y0),
                                             Point2(x1, y1), Point2(x0, y1)]))
    lm_objs = [Landmark(name, Point2(*pos), side) for name, pos, side in landmarks]
    walls_arr = np.asarray(wall_pairs, dtype=float).reshape(-1, 2, 2)
    return FloorPlan(walls=walls_arr, rooms=room_objs, landmarks=lm_objs)
