"""Map-free route backtracking.

The outbound walk is stored as a chain of straight segments measured in
steps, quarter-turn direction changes between them, and a magnetic
signature sampled three times per step interval. For the return trip the
signature is matched, sample by sample, against the reversed record with
an incremental dynamic-time-warping lattice; stretches where the match
advances linearly anchor a projected position on the recorded path,
which is then advanced by live step and turn events.

Before the return trip the recorded path is simplified: short
out-and-back spurs are cut exactly, and revisited stretches are spliced
out (a lossy operation, flagged on the record).
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import RecordError
from .pdr import QUARTER_TURN, TurnEvent
from .route_graph import wrap_angle

RECORD_SCHEMA = "wayin/1"
SAMPLES_PER_STEP = 3
SIMPLIFY_RADIUS_STEPS = 7

ALIGNMENT_WINDOW_SAMPLES = 200
TAIL_SAMPLES = 21
TAIL_SLOPE_BOUNDS = (0.8, 1.2)
TAIL_MAX_RMS = 2.0
SKIP_COST_FLOOR = 0.1
SKIP_COST_FRACTION = 0.5
SKIP_COST_CALIBRATION_SAMPLES = 50
LAYER_COST_FACTOR = 10.0
LOST_AFTER_PINNED_COLUMNS = 200

VERTEX_SNAP_STEPS = 14

_DIR_VECTORS = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)


def quarter_turns(angle: float) -> int:
    """Round an angle to a whole number of quarter turns in {-2..2}."""
    q = int(round(wrap_angle(angle) / QUARTER_TURN))
    if q == -2:
        q = 2
    return q


@dataclass
class WayInRecord:
    """Recorded outbound walk: step-count segments, quarter turns, signature."""
    segments: list[int]
    turns: list[TurnEvent]          # step_index = steps walked before the turn
    samples: np.ndarray             # (3 * total steps, 2) magnetic features
    step_length_m: float
    lossy: bool = False

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 2)
        if not self.segments or any(s < 1 for s in self.segments):
            raise RecordError("every segment must contain at least one step")
        if len(self.turns) != len(self.segments) - 1:
            raise RecordError("need exactly one turn between consecutive segments")
        boundaries = np.cumsum(self.segments)
        for turn, boundary in zip(self.turns, boundaries):
            if turn.step_index != boundary:
                raise RecordError("turn positions must match segment boundaries")
            if quarter_turns(turn.angle) == 0:
                raise RecordError("turn angles must be nonzero quarter multiples")
        if len(self.samples) != SAMPLES_PER_STEP * self.total_steps:
            raise RecordError(
                f"expected {SAMPLES_PER_STEP * self.total_steps} samples, "
                f"got {len(self.samples)}")
        if not np.isfinite(self.samples).all():
            raise RecordError("samples must be finite")

    @property
    def total_steps(self) -> int:
        return int(sum(self.segments))

    def step_directions(self) -> np.ndarray:
        """Quarter-turn direction of every step; the first segment heads 0."""
        dirs = np.empty(self.total_steps, dtype=int)
        d = 0
        start = 0
        for k, count in enumerate(self.segments):
            dirs[start:start + count] = d
            start += count
            if k < len(self.turns):
                d = (d + quarter_turns(self.turns[k].angle)) % 4
        return dirs

    def polyline(self) -> np.ndarray:
        """Vertices of the walk on the step grid, starting at the origin."""
        dirs = self.step_directions()
        pts = np.vstack([[0.0, 0.0], np.cumsum(_DIR_VECTORS[dirs], axis=0)])
        keep = np.ones(len(pts), dtype=bool)
        keep[1:-1] = (dirs[1:] != dirs[:-1])
        return pts[keep]

    def net_displacement(self) -> np.ndarray:
        """End-to-start offset in step units on the grid."""
        dirs = self.step_directions()
        return _DIR_VECTORS[dirs].sum(axis=0)

    def sample_turn_angles(self) -> np.ndarray:
        """Turn angle carried by each sample (nonzero only at boundaries)."""
        angles = np.zeros(len(self.samples))
        boundary = np.cumsum(self.segments)
        for turn, c in zip(self.turns, boundary):
            angles[SAMPLES_PER_STEP * int(c) - 1] = turn.angle
        return angles

    def reversed_features(self) -> np.ndarray:
        return self.samples[::-1].copy()

    def reversed_turn_angles(self) -> np.ndarray:
        return -self.sample_turn_angles()[::-1].copy()

    def reversed_directions(self) -> tuple[list[int], list[int]]:
        """(segment step counts, quarter directions) of the reversed walk."""
        dirs = self.step_directions()
        rev = (dirs[::-1] + 2) % 4
        rev = (rev - rev[0]) % 4
        segments: list[int] = []
        directions: list[int] = []
        for d in rev:
            if directions and directions[-1] == d:
                segments[-1] += 1
            else:
                directions.append(int(d))
                segments.append(1)
        return segments, directions

    def to_document(self) -> dict:
        return {
            "schema": RECORD_SCHEMA,
            "step_length_m": float(self.step_length_m),
            "segments": [int(s) for s in self.segments],
            "turns": [
                {"after_steps": int(t.step_index),
                 "angle_deg": round(math.degrees(t.angle), 6)}
                for t in self.turns
            ],
            "samples": [[float(a), float(b)] for a, b in self.samples],
            "lossy": bool(self.lossy),
        }


def load_record(source: str | dict) -> WayInRecord:
    doc = json.loads(source) if isinstance(source, str) else source
    if not isinstance(doc, dict) or doc.get("schema") != RECORD_SCHEMA:
        raise RecordError(f"not a {RECORD_SCHEMA} record")
    try:
        segments = [int(s) for s in doc["segments"]]
        turns = [TurnEvent(int(t["after_steps"]), math.radians(float(t["angle_deg"])))
                 for t in doc["turns"]]
        samples = np.asarray(doc["samples"], dtype=float).reshape(-1, 2)
        step_length = float(doc["step_length_m"])
        lossy = bool(doc.get("lossy", False))
    except (KeyError, ValueError, TypeError) as exc:
        raise RecordError(f"malformed record document: {exc}") from exc
    return WayInRecord(segments, turns, samples, step_length, lossy)


def dump_record(record: WayInRecord) -> str:
    return json.dumps(record.to_document())


def record_way_in(step_times, turn_events: list[TurnEvent],
                  feature_times, features, step_length_m: float,
                  session_start: float | None = None) -> WayInRecord:
    """Build a walk record from step events, turns and magnetic features.

    The magnetic signature is resampled to three regularly spaced points
    per step interval by linear interpolation; nothing is sampled outside
    step intervals, so a stationary stretch adds no samples. Turns are
    snapped to segment boundaries between steps.
    """
    step_times = np.asarray(step_times, dtype=float).reshape(-1)
    n_steps = len(step_times)
    if n_steps < 1:
        raise RecordError("cannot record a walk with no steps")
    feature_times = np.asarray(feature_times, dtype=float).reshape(-1)
    features = np.asarray(features, dtype=float).reshape(-1, 2)
    if len(feature_times) != len(features) or len(features) == 0:
        raise RecordError("feature stream is empty or mismatched")

    if session_start is None:
        gap = float(np.median(np.diff(step_times))) if n_steps > 1 else 0.5
        session_start = float(step_times[0]) - gap
    boundaries = np.concatenate([[session_start], step_times])
    if np.any(np.diff(boundaries) <= 0):
        raise RecordError("step times must be strictly increasing")

    fractions = (np.arange(1, SAMPLES_PER_STEP + 1)) / SAMPLES_PER_STEP
    sample_times = (boundaries[:-1][:, None]
                    + np.diff(boundaries)[:, None] * fractions[None, :]).ravel()
    samples = np.column_stack([
        np.interp(sample_times, feature_times, features[:, 0]),
        np.interp(sample_times, feature_times, features[:, 1]),
    ])

    # Snap turns to boundaries strictly inside the walk, merging collisions.
    cut_angles: dict[int, float] = {}
    for ev in sorted(turn_events, key=lambda e: e.step_index):
        cut = min(max(int(ev.step_index), 1), n_steps - 1) if n_steps > 1 else 0
        if n_steps == 1:
            continue
        cut_angles[cut] = cut_angles.get(cut, 0.0) + ev.angle
    cuts = []
    turns = []
    for cut in sorted(cut_angles):
        angle = wrap_angle(cut_angles[cut])
        if quarter_turns(angle) == 0:
            continue
        cuts.append(cut)
        turns.append(TurnEvent(cut, quarter_turns(angle) * QUARTER_TURN))
    segments = list(np.diff([0] + cuts + [n_steps]))
    return WayInRecord([int(s) for s in segments], turns, samples, step_length_m)


def _run_length(dirs: np.ndarray) -> list[tuple[int, int, int]]:
    """(direction, start, length) runs over the per-step direction array."""
    runs = []
    start = 0
    for k in range(1, len(dirs) + 1):
        if k == len(dirs) or dirs[k] != dirs[start]:
            runs.append((int(dirs[start]), start, k - start))
            start = k
    return runs


def simplify(record: WayInRecord, radius_steps: int = SIMPLIFY_RADIUS_STEPS) -> WayInRecord:
    """Clean a walk record within a positional uncertainty radius.

    Two reductions run to a fixed point. Short out-and-back spurs, where
    the walk reverses and retraces at most `radius_steps` steps, are cut
    exactly and preserve the net displacement. Revisits, where the walk
    comes back within `radius_steps` of an earlier position after a
    detour longer than twice the radius, are spliced out; splices can
    shift the endpoint, so they mark the record as lossy.
    """
    dirs = record.step_directions()
    samples = record.samples.reshape(-1, SAMPLES_PER_STEP, 2)
    lossy = record.lossy

    def spur_pass(dirs, samples):
        runs = _run_length(dirs)
        for (d1, s1, n1), (d2, s2, n2) in zip(runs, runs[1:]):
            if (d2 - d1) % 4 != 2 or min(n1, n2) > radius_steps:
                continue
            if n1 > n2:
                drop = slice(s1 + (n1 - n2), s2 + n2)
            elif n2 > n1:
                drop = slice(s1, s2 + n1)
            else:
                drop = slice(s1, s2 + n2)
            keep = np.ones(len(dirs), dtype=bool)
            keep[drop] = False
            return dirs[keep], samples[keep]
        return None

    def splice_pass(dirs, samples):
        pts = np.vstack([[0.0, 0.0], np.cumsum(_DIR_VECTORS[dirs], axis=0)])
        gap = 2 * radius_steps
        n = len(pts)
        if n <= gap + 1:
            return None
        diff = pts[:, None, :] - pts[None, :, :]
        close = (diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2) <= radius_steps ** 2
        for s in range(n - gap - 1):
            ts = np.flatnonzero(close[s, s + gap + 1:])
            if len(ts) == 0:
                continue
            t = s + gap + 1 + int(ts[0])
            keep = np.ones(len(dirs), dtype=bool)
            keep[s:t] = False
            return dirs[keep], samples[keep]
        return None

    while True:
        reduced = spur_pass(dirs, samples)
        if reduced is not None:
            dirs, samples = reduced
            continue
        reduced = splice_pass(dirs, samples)
        if reduced is not None:
            dirs, samples = reduced
            lossy = True
            continue
        break

    if len(dirs) == 0:
        raise RecordError("walk simplifies to nothing within the given radius")
    runs = _run_length(dirs)
    segments = [n for (_, _, n) in runs]
    turns = []
    acc = 0
    for (d1, _, n1), (d2, _, _) in zip(runs, runs[1:]):
        acc += n1
        q = (d2 - d1) % 4
        angle = {1: QUARTER_TURN, 2: math.pi, 3: -QUARTER_TURN}[q]
        turns.append(TurnEvent(acc, angle))
    return WayInRecord(segments, turns, samples.reshape(-1, 2),
                       record.step_length_m, lossy)


@dataclass(frozen=True)
class ReliableMatch:
    """A stretch where the alignment advanced one-to-one along the record."""
    way_in_index: int       # sample index into the reversed record
    return_index: int       # sample index into the return stream
    time_s: float | None = None

    def step_position(self) -> float:
        """Position on the reversed walk, in steps."""
        return (self.way_in_index + 1) / SAMPLES_PER_STEP


def tail_regression(way_in_indices, return_indices) -> tuple[float, float] | None:
    """Least-squares slope and RMS residual of record index against return index."""
    i = np.asarray(way_in_indices, dtype=float)
    j = np.asarray(return_indices, dtype=float)
    vj = float(np.var(j))
    if vj == 0.0:
        return None
    slope = float(np.cov(j, i, bias=True)[0, 1]) / vj
    intercept = float(np.mean(i) - slope * np.mean(j))
    resid = i - (intercept + slope * j)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return slope, rms


@dataclass
class AlignmentResult:
    return_index: int
    way_in_index: int
    cost: float
    layer_deg: int
    reliable: ReliableMatch | None
    lost: bool


class OnlineAligner:
    """Incremental DTW of the return signature against a reversed record.

    The lattice matches return samples (columns) to reversed way-in
    samples (rows). Each new column is filled only inside a window
    centered on the previous best endpoint. Moves that consume a sample
    in just one sequence pay a skip cost; moves that consume a turn in
    one sequence without a matching turn in the other pay an orientation
    layer cost per quarter turn of mismatch.
    """

    def __init__(self, record: WayInRecord,
                 window: int = ALIGNMENT_WINDOW_SAMPLES,
                 skip_cost: float | None = None,
                 skip_cost_floor: float = SKIP_COST_FLOOR,
                 skip_cost_fraction: float = SKIP_COST_FRACTION,
                 skip_calibration_samples: int = SKIP_COST_CALIBRATION_SAMPLES,
                 layer_cost_factor: float = LAYER_COST_FACTOR,
                 tail_samples: int = TAIL_SAMPLES,
                 slope_bounds: tuple[float, float] = TAIL_SLOPE_BOUNDS,
                 tail_max_rms: float = TAIL_MAX_RMS,
                 lost_after: int = LOST_AFTER_PINNED_COLUMNS):
        self.record = record
        self.way_in = record.reversed_features()
        self.way_turns = record.reversed_turn_angles()
        self.way_qturns = np.array([abs(quarter_turns(a)) for a in self.way_turns])
        self.window = window
        self.fixed_skip = skip_cost
        self.skip_floor = skip_cost_floor
        self.skip_fraction = skip_cost_fraction
        self.skip_calibration = skip_calibration_samples
        self.layer_factor = layer_cost_factor
        self.tail_samples = tail_samples
        self.slope_bounds = slope_bounds
        self.tail_max_rms = tail_max_rms
        self.lost_after = lost_after

        self._columns: deque = deque(maxlen=max(64, tail_samples + 4))
        self._j = -1
        self._endpoint = 0
        self._pinned = 0
        self._endpoint_node_costs: list[float] = []
        self._calibrated_skip: float | None = None
        self._return_turn_cum = 0.0
        self._way_turn_cum = np.concatenate([[0.0], np.cumsum(self.way_turns)])

    @property
    def skip_cost(self) -> float:
        if self.fixed_skip is not None:
            return self.fixed_skip
        if self._calibrated_skip is not None:
            return self._calibrated_skip
        return self.skip_floor

    @property
    def endpoint(self) -> int:
        return self._endpoint

    def layer_deg(self, way_in_index: int) -> int:
        """Orientation discrepancy at the endpoint, in degrees."""
        diff = self._return_turn_cum - self._way_turn_cum[way_in_index + 1]
        q = quarter_turns(diff)
        return {0: 0, 1: 90, 2: 180, -1: -90}[q]

    def push(self, feature, turn_angle: float = 0.0,
             time_s: float | None = None) -> AlignmentResult:
        """Consume one return sample; returns the updated best endpoint."""
        self._j += 1
        j = self._j
        self._return_turn_cum += turn_angle
        f = np.asarray(feature, dtype=float).reshape(2)
        n = len(self.way_in)
        w = min(self.window, n)
        lo = max(0, min(self._endpoint - self.window // 2, n - w))
        hi = lo + w

        node = np.linalg.norm(self.way_in[lo:hi] - f[None, :], axis=1)
        c_skip = self.skip_cost
        c_layer = self.layer_factor * c_skip
        r_q = abs(quarter_turns(turn_angle))

        inf = math.inf
        cost = np.empty(w)
        back = np.empty(w, dtype=np.uint8)

        if j == 0:
            prev_cost = None
            prev_lo = 0
        else:
            prev_lo, prev_cost, _ = self._columns[-1]

        def prev_at(i: int) -> float:
            if prev_cost is None:
                return inf
            k = i - prev_lo
            if 0 <= k < len(prev_cost):
                return float(prev_cost[k])
            return inf

        for idx in range(w):
            i = lo + idx
            w_q = int(self.way_qturns[i])
            pen_diag = c_layer * abs_q_diff(turn_angle, self.way_turns[i])
            pen_left = c_layer * r_q
            pen_up = c_layer * w_q
            best = inf
            choice = 255
            if j == 0 and i == 0:
                best = 0.0
                choice = 3  # origin
            if j > 0:
                diag = prev_at(i - 1) + pen_diag
                if diag < best:
                    best, choice = diag, 0
                left = prev_at(i) + (c_skip + pen_left)
                if left < best:
                    best, choice = left, 2
            if idx > 0:
                up = cost[idx - 1] + (c_skip + pen_up)
                if up < best:
                    best, choice = up, 1
            if best == inf:
                cost[idx] = inf
                back[idx] = 255
            else:
                cost[idx] = best + node[idx]
                back[idx] = choice

        finite = np.isfinite(cost)
        if not finite.any():
            raise RecordError("alignment window contains no reachable cells")
        endpoint_idx = int(np.argmin(np.where(finite, cost, inf)))
        self._endpoint = lo + endpoint_idx
        self._columns.append((lo, cost, back))
        self._endpoint_node_costs.append(float(node[endpoint_idx]))

        if (self.fixed_skip is None and self._calibrated_skip is None
                and j + 1 >= self.skip_calibration):
            median = float(np.median(self._endpoint_node_costs[:self.skip_calibration]))
            self._calibrated_skip = max(self.skip_floor,
                                        self.skip_fraction * median)

        pinned = ((self._endpoint == lo and lo > 0)
                  or (self._endpoint == hi - 1 and hi < n))
        self._pinned = self._pinned + 1 if pinned else 0
        lost = self._pinned > self.lost_after

        reliable = reliable_match_test(self, time_s)
        return AlignmentResult(j, self._endpoint, float(cost[endpoint_idx]),
                               self.layer_deg(self._endpoint), reliable, lost)

    def path_tail(self, count: int) -> tuple[np.ndarray, np.ndarray] | None:
        """Last `count` lattice nodes of the current best path, oldest first."""
        if self._j < 0:
            return None
        cols = list(self._columns)
        col_of: dict[int, int] = {}
        first_j = self._j - len(cols) + 1
        for k in range(len(cols)):
            col_of[first_j + k] = k
        i, j = self._endpoint, self._j
        nodes = [(i, j)]
        while len(nodes) < count:
            k = col_of.get(j)
            if k is None:
                return None  # tail extends beyond retained columns
            lo, _, back = cols[k]
            choice = int(back[i - lo])
            if choice == 0:
                i, j = i - 1, j - 1
            elif choice == 1:
                i = i - 1
            elif choice == 2:
                j = j - 1
            else:
                return None  # reached the origin before collecting the tail
            nodes.append((i, j))
        nodes.reverse()
        arr = np.asarray(nodes, dtype=float)
        return arr[:, 0], arr[:, 1]


def abs_q_diff(return_turn: float, way_turn: float) -> int:
    """Quarter turns of orientation mismatch when consuming both samples."""
    return abs(quarter_turns(return_turn - way_turn))


def reliable_match_test(aligner: OnlineAligner,
                        time_s: float | None = None) -> ReliableMatch | None:
    """Check whether the recent alignment path advances one-to-one.

    The last few path nodes must fit a line of roughly unit slope with a
    small residual; then the current endpoint is a trustworthy position
    on the recorded walk.
    """
    tail = aligner.path_tail(aligner.tail_samples)
    if tail is None:
        return None
    fit = tail_regression(tail[0], tail[1])
    if fit is None:
        return None
    slope, rms = fit
    lo, hi = aligner.slope_bounds
    if not (lo <= slope <= hi and rms <= aligner.tail_max_rms):
        return None
    return ReliableMatch(aligner._endpoint, aligner._j, time_s)


@dataclass
class ProjectedSequence:
    """Projected position on the reversed walk, advanced by live events.

    Steps taken while the walker's heading matches the local path
    direction advance the position; any other step grows a deviation
    vector on the step grid. A turn near a recorded corner snaps the
    position onto it. The deviation norm drives the wrong-direction
    warning, and it shrinks again as the walker retraces their error.
    """
    segments: list[int]
    directions: list[int]
    anchor: ReliableMatch
    position: float
    heading: int
    steps_since_anchor: int = 0
    deviation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    vertex_snap_steps: int = VERTEX_SNAP_STEPS

    @classmethod
    def from_record(cls, record: WayInRecord, match: ReliableMatch) -> "ProjectedSequence":
        segments, directions = record.reversed_directions()
        pos = min(match.step_position(), float(sum(segments)))
        seq = cls(segments, directions, match, pos, 0)
        seq.heading = seq.direction_at(pos)
        return seq

    @property
    def total_steps(self) -> int:
        return int(sum(self.segments))

    @property
    def divergence_steps(self) -> float:
        return float(np.hypot(self.deviation[0], self.deviation[1]))

    def direction_at(self, position: float) -> int:
        """Direction of the step that crosses `position`; end falls back to last."""
        acc = 0.0
        for count, d in zip(self.segments, self.directions):
            acc += count
            if position < acc:
                return d
        return self.directions[-1]

    def at_end(self, position: float | None = None) -> bool:
        p = self.position if position is None else position
        return p >= self.total_steps

    def next_vertex(self) -> tuple[float, int] | None:
        """(position, direction after it) of the next recorded corner."""
        acc = 0.0
        for k, count in enumerate(self.segments[:-1]):
            acc += count
            if acc >= self.position:
                return acc, self.directions[k + 1]
        return None

    def distance_to_next_turn(self) -> float | None:
        nxt = self.next_vertex()
        if nxt is None:
            return None
        return nxt[0] - self.position

    def remaining_steps(self) -> float:
        return max(0.0, self.total_steps - self.position)

    def re_anchor(self, match: ReliableMatch) -> None:
        self.anchor = match
        self.position = min(match.step_position(), float(self.total_steps))
        self.heading = self.direction_at(self.position)
        self.steps_since_anchor = 0
        self.deviation = np.zeros(2)


def advance_projection(seq: ProjectedSequence, event: tuple) -> ProjectedSequence:
    """Advance the projected position by a live ('step',) or ('turn', angle) event."""
    kind = event[0]
    if kind == "step":
        on_path = (seq.divergence_steps == 0.0 and not seq.at_end()
                   and seq.heading == seq.direction_at(seq.position))
        if on_path:
            seq.position = min(seq.position + 1.0, float(seq.total_steps))
        else:
            seq.deviation = seq.deviation + _DIR_VECTORS[seq.heading]
        seq.steps_since_anchor += 1
    elif kind == "turn":
        q = quarter_turns(event[1])
        seq.heading = (seq.heading + q) % 4
        nxt = seq.next_vertex()
        if nxt is not None:
            vertex_pos, next_dir = nxt
            near = ((vertex_pos - seq.position) <= seq.vertex_snap_steps
                    and seq.divergence_steps <= seq.vertex_snap_steps)
            if near and seq.heading == next_dir:
                seq.position = vertex_pos
                seq.deviation = np.zeros(2)
    else:
        raise ValueError(f"unknown projection event {kind!r}")
    return seq
