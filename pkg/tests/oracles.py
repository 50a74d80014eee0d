"""Independent reference implementations the tests compare against.

Each function recomputes an answer by a different method than the
library: exact rational arithmetic, exhaustive enumeration, dense
sampling, or a full dynamic-programming lattice with no windowing.
Expected values asserted in the test files were produced by these
oracles first and then frozen.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

QUARTER = math.pi / 2.0


# ---------------------------------------------------------------------------
# Exact segment intersection (rational orientation predicates)
# ---------------------------------------------------------------------------

def _orient_exact(a, b, p) -> Fraction:
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    px, py = Fraction(p[0]), Fraction(p[1])
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _in_box(a, b, p) -> bool:
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def move_hits_wall_exact(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection of a movement (p1, p2) with a wall.

    Proper crossings and any touching configuration (endpoint contact,
    collinear overlap) count. A zero-length movement never hits.
    """
    if p1[0] == p2[0] and p1[1] == p2[1]:
        return False
    d1 = _orient_exact(q1, q2, p1)
    d2 = _orient_exact(q1, q2, p2)
    d3 = _orient_exact(p1, p2, q1)
    d4 = _orient_exact(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) \
            and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _in_box(q1, q2, p1):
        return True
    if d2 == 0 and _in_box(q1, q2, p2):
        return True
    if d3 == 0 and _in_box(p1, p2, q1):
        return True
    if d4 == 0 and _in_box(p1, p2, q2):
        return True
    return False


# ---------------------------------------------------------------------------
# Winding-number point-in-polygon (boundary inclusive)
# ---------------------------------------------------------------------------

def point_in_polygon_winding(p, polygon) -> bool:
    """Exact winding-number membership; points on the boundary count.

    For simple polygons a nonzero winding number coincides with the
    even-odd rule, so this is a fair independent check.
    """
    px, py = Fraction(p[0]), Fraction(p[1])
    poly = [(Fraction(v[0]), Fraction(v[1])) for v in polygon]
    winding = 0
    m = len(poly)
    for k in range(m):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % m]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if cross == 0 and min(ax, bx) <= px <= max(ax, bx) \
                and min(ay, by) <= py <= max(ay, by):
            return True
        if ay <= py:
            if by > py and cross > 0:
                winding += 1
        elif by <= py and cross < 0:
            winding -= 1
    return winding != 0


# ---------------------------------------------------------------------------
# Exhaustive shortest route
# ---------------------------------------------------------------------------

def enumerate_shortest_route(graph, start: str, goal: str):
    """Minimum over all simple paths, keyed by (length, waypoint sequence).

    Lengths accumulate front to back, the same order a best-first search
    grows them, so tie comparisons see identical floats. Returns
    (ids, length) or None when the goal is unreachable.
    """
    if start == goal:
        return [start], 0.0
    best: tuple[float, tuple[str, ...]] | None = None

    def walk(node: str, path: tuple[str, ...], dist: float, seen: set) -> None:
        nonlocal best
        if node == goal:
            key = (dist, path)
            if best is None or key < best:
                best = key
            return
        for seg_idx in graph.incident(node):
            seg = graph.segments[seg_idx]
            nxt = seg.other(node)
            if nxt in seen:
                continue
            walk(nxt, path + (nxt,), dist + seg.length, seen | {nxt})

    walk(start, (start,), 0.0, {start})
    if best is None:
        return None
    return list(best[1]), best[0]


# ---------------------------------------------------------------------------
# Dense-sampling projection
# ---------------------------------------------------------------------------

def dense_projection(p, a, b, samples: int = 100_001):
    """Closest of `samples` points spread uniformly along segment ab."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = np.asarray(p, dtype=float)
    t = np.linspace(0.0, 1.0, samples)
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    d = np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1])
    k = int(np.argmin(d))
    return pts[k], float(t[k]), float(d[k])


# ---------------------------------------------------------------------------
# Fine-grid quadrature of a piecewise-linear velocity
# ---------------------------------------------------------------------------

def quadrature_displacement(times, velocities, multiplier: float = 1.0,
                            t_start: float | None = None,
                            t_end: float | None = None,
                            points: int = 10_001) -> np.ndarray:
    """Composite trapezoid on a dense uniform grid over [t_start, t_end].

    The velocity is interpolated linearly between samples and held
    constant beyond the sampled range, matching the integration contract.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(velocities, dtype=float).reshape(-1, 2)
    t0 = float(t[0] if t_start is None else t_start)
    t1 = float(t[-1] if t_end is None else t_end)
    grid = np.linspace(t0, t1, points)
    vx = np.interp(grid, t, v[:, 0])
    vy = np.interp(grid, t, v[:, 1])
    dt = np.diff(grid)
    ix = float(np.sum(0.5 * (vx[1:] + vx[:-1]) * dt))
    iy = float(np.sum(0.5 * (vy[1:] + vy[:-1]) * dt))
    return multiplier * np.array([ix, iy])


# ---------------------------------------------------------------------------
# Full-lattice sequence alignment (no window, no cost calibration)
# ---------------------------------------------------------------------------

def quarter_turns_ref(angle: float) -> int:
    """Angle quantized to quarter turns in {-1, 0, 1, 2}."""
    q = round(angle / QUARTER) % 4
    return q - 4 if q > 2 else q


def full_lattice_alignment(way_features, way_turns, return_features,
                           return_turns, skip_cost: float,
                           layer_factor: float = 10.0):
    """Exhaustive alignment lattice over all way-in rows for every column.

    The per-cell cost expression keeps the exact operand grouping of the
    incremental aligner so that, whenever the window covers the whole
    row range, the two agree to the last bit. Returns the per-column
    best endpoint indices and their costs.
    """
    way = np.asarray(way_features, dtype=float).reshape(-1, 2)
    way_turns = [float(a) for a in way_turns]
    n = len(way)
    c_skip = float(skip_cost)
    c_layer = layer_factor * c_skip
    way_q = [abs(quarter_turns_ref(a)) for a in way_turns]
    inf = math.inf

    prev: np.ndarray | None = None
    endpoints: list[int] = []
    costs: list[float] = []
    for j, raw in enumerate(np.asarray(return_features, dtype=float).reshape(-1, 2)):
        turn = float(return_turns[j])
        f = raw.reshape(2)
        node = np.linalg.norm(way - f[None, :], axis=1)
        r_q = abs(quarter_turns_ref(turn))
        col = np.empty(n)
        for i in range(n):
            pen_diag = c_layer * abs(quarter_turns_ref(turn - way_turns[i]))
            pen_left = c_layer * r_q
            pen_up = c_layer * way_q[i]
            best = inf
            if j == 0 and i == 0:
                best = 0.0
            if j > 0:
                diag = (prev[i - 1] if i >= 1 else inf) + pen_diag
                if diag < best:
                    best = diag
                left = prev[i] + (c_skip + pen_left)
                if left < best:
                    best = left
            if i > 0:
                up = col[i - 1] + (c_skip + pen_up)
                if up < best:
                    best = up
            col[i] = best + node[i] if best != inf else inf
        prev = col
        finite = np.isfinite(col)
        k = int(np.argmin(np.where(finite, col, inf)))
        endpoints.append(k)
        costs.append(float(col[k]))
    return endpoints, costs


# ---------------------------------------------------------------------------
# Least-squares line fit by a different solver
# ---------------------------------------------------------------------------

def line_fit_qr(x, y) -> tuple[float, float]:
    """Slope of y against x and RMS residual, via the polyfit QR path."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid ** 2)))
