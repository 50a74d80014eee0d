"""Deterministic SVG rendering of floor plans and walked paths.

Output is plain text with fixed 3-decimal coordinates so identical
inputs produce byte-identical files.
"""
from __future__ import annotations

import numpy as np

_SCALE = 12.0  # px per meter
_MARGIN = 24.0


def _fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


class _View:
    def __init__(self, xs, ys):
        self.x0 = min(xs) if xs else 0.0
        self.y1 = max(ys) if ys else 0.0

    def pt(self, x: float, y: float) -> tuple[float, float]:
        # Flip y so north is up in screen coordinates.
        return ((x - self.x0) * _SCALE + _MARGIN,
                (self.y1 - y) * _SCALE + _MARGIN)


def _polyline(view: _View, pts, stroke: str, width: float,
              dash: str | None = None) -> str:
    if len(pts) < 2:
        return ""
    coords = " ".join(
        f"{_fmt(px)},{_fmt(py)}" for px, py in (view.pt(x, y) for x, y in pts)
    )
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline points="{coords}" fill="none" stroke="{stroke}"'
            f' stroke-width="{_fmt(width)}"{dash_attr}/>')


def render_svg(plan=None, walls=None, truth=None, estimate=None,
               way_in=None, landmarks=None, title: str = "") -> str:
    """Render walls plus optional paths to an SVG document string.

    ``plan`` supplies walls/rooms/landmarks when given; ``walls`` is a
    raw (N, 2, 2) array alternative. Paths are (N, 2) point arrays.
    """
    if plan is not None:
        walls = plan.walls
        if landmarks is None and getattr(plan, "landmarks", None):
            landmarks = [(lm.name, lm.position) for lm in plan.landmarks]
    walls = np.asarray(walls if walls is not None else np.zeros((0, 2, 2)),
                       dtype=float)

    xs, ys = [], []
    for seg in walls:
        xs += [seg[0][0], seg[1][0]]
        ys += [seg[0][1], seg[1][1]]
    for path in (truth, estimate, way_in):
        if path is not None and len(path):
            arr = np.asarray(path, dtype=float)
            xs += list(arr[:, 0])
            ys += list(arr[:, 1])
    for _, pos in (landmarks or []):
        xs.append(float(pos[0]))
        ys.append(float(pos[1]))
    view = _View(xs, ys)
    w = ((max(xs) - min(xs)) if xs else 0.0) * _SCALE + 2 * _MARGIN
    h = ((max(ys) - min(ys)) if ys else 0.0) * _SCALE + 2 * _MARGIN

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(w)}"'
        f' height="{_fmt(h)}" viewBox="0 0 {_fmt(w)} {_fmt(h)}">',
        f'<rect width="{_fmt(w)}" height="{_fmt(h)}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_fmt(_MARGIN)}" y="{_fmt(_MARGIN * 0.7)}"'
            f' font-family="sans-serif" font-size="13">{title}</text>'
        )
    for seg in walls:
        (ax, ay), (bx, by) = view.pt(*seg[0]), view.pt(*seg[1])
        parts.append(
            f'<line x1="{_fmt(ax)}" y1="{_fmt(ay)}" x2="{_fmt(bx)}"'
            f' y2="{_fmt(by)}" stroke="#333333" stroke-width="1.500"/>'
        )
    if way_in is not None and len(way_in):
        parts.append(_polyline(view, np.asarray(way_in, dtype=float),
                               "#999999", 1.2, dash="5,4"))
    if truth is not None and len(truth):
        parts.append(_polyline(view, np.asarray(truth, dtype=float),
                               "#2c7fb8", 1.8))
    if estimate is not None and len(estimate):
        parts.append(_polyline(view, np.asarray(estimate, dtype=float),
                               "#d95f02", 1.8, dash="2,3"))
    for name, pos in (landmarks or []):
        cx, cy = view.pt(float(pos[0]), float(pos[1]))
        parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3.000"'
                     f' fill="#1b9e77"/>')
        parts.append(
            f'<text x="{_fmt(cx + 5)}" y="{_fmt(cy - 5)}"'
            f' font-family="sans-serif" font-size="10">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(p for p in parts if p) + "\n"
