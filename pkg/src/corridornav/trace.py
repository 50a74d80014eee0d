"""Sensor trace files.

A trace is a comma-separated text file with one row per sensor sample:

    t,azimuth,vx,vy,mx,my,mz,gx,gy,gz,step

t is seconds from session start, azimuth is radians in the sensor frame,
vx/vy are the estimated planar velocity in m/s (both empty when no
velocity source is available), mx..mz the magnetic vector in microtesla,
gx..gz the gravity direction, and step is 1 on heel-strike samples.
Non-finite values are rejected on read.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import TraceError
from .pdr import magnetic_features

TRACE_COLUMNS = ["t", "azimuth", "vx", "vy", "mx", "my", "mz", "gx", "gy", "gz", "step"]


@dataclass
class SensorTrace:
    t: np.ndarray           # (N,)
    azimuth: np.ndarray     # (N,)
    magnetic: np.ndarray    # (N, 3)
    gravity: np.ndarray     # (N, 3)
    step_flag: np.ndarray   # (N,) bool
    velocity: np.ndarray | None = None  # (N, 2) or None

    def __post_init__(self) -> None:
        n = len(self.t)
        if not (len(self.azimuth) == len(self.magnetic) == len(self.gravity)
                == len(self.step_flag) == n):
            raise TraceError("trace arrays must have equal length")
        if self.velocity is not None and len(self.velocity) != n:
            raise TraceError("velocity array length mismatch")
        if n and np.any(np.diff(self.t) < 0):
            raise TraceError("timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.t)

    def step_indices(self) -> np.ndarray:
        return np.flatnonzero(self.step_flag)

    def step_times(self) -> np.ndarray:
        return self.t[self.step_flag]

    def step_azimuths(self) -> np.ndarray:
        return self.azimuth[self.step_flag]

    def features(self) -> np.ndarray:
        """Orientation-invariant magnetic features for every sample."""
        return magnetic_features(self.magnetic, self.gravity)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace(trace: SensorTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    has_v = trace.velocity is not None
    for i in range(len(trace)):
        vx = _fmt(trace.velocity[i, 0]) if has_v else ""
        vy = _fmt(trace.velocity[i, 1]) if has_v else ""
        writer.writerow([
            _fmt(trace.t[i]), _fmt(trace.azimuth[i]), vx, vy,
            _fmt(trace.magnetic[i, 0]), _fmt(trace.magnetic[i, 1]),
            _fmt(trace.magnetic[i, 2]),
            _fmt(trace.gravity[i, 0]), _fmt(trace.gravity[i, 1]),
            _fmt(trace.gravity[i, 2]),
            "1" if trace.step_flag[i] else "0",
        ])
    return buf.getvalue()


def _parse_float(token: str, row: int, col: str) -> float:
    try:
        value = float(token)
    except ValueError as exc:
        raise TraceError(f"row {row}: column {col!r} is not a number: {token!r}") from exc
    if not math.isfinite(value):
        raise TraceError(f"row {row}: column {col!r} is not finite: {token!r}")
    return value


def read_trace(text: str) -> SensorTrace:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceError("trace file is empty") from None
    if [h.strip() for h in header] != TRACE_COLUMNS:
        raise TraceError(
            f"unexpected trace header {header!r}; expected {TRACE_COLUMNS!r}")
    cols: dict[str, list] = {c: [] for c in TRACE_COLUMNS}
    velocity_present: bool | None = None
    for n, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TRACE_COLUMNS):
            raise TraceError(f"row {n}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
        has_v = row[2].strip() != "" or row[3].strip() != ""
        if velocity_present is None:
            velocity_present = has_v
        elif velocity_present != has_v:
            raise TraceError(f"row {n}: velocity columns must be all present or all empty")
        for c, token in zip(TRACE_COLUMNS, row):
            if c in ("vx", "vy") and not has_v:
                continue
            if c == "step":
                token = token.strip()
                if token not in ("0", "1"):
                    raise TraceError(f"row {n}: step flag must be 0 or 1, got {token!r}")
                cols[c].append(token == "1")
            else:
                cols[c].append(_parse_float(token, n, c))
    velocity = None
    if velocity_present:
        velocity = np.column_stack([np.array(cols["vx"]), np.array(cols["vy"])])
    return SensorTrace(
        t=np.array(cols["t"], dtype=float),
        azimuth=np.array(cols["azimuth"], dtype=float),
        magnetic=np.column_stack([np.array(cols["mx"]), np.array(cols["my"]),
                                  np.array(cols["mz"])]) if cols["mx"] else np.zeros((0, 3)),
        gravity=np.column_stack([np.array(cols["gx"]), np.array(cols["gy"]),
                                 np.array(cols["gz"])]) if cols["gx"] else np.zeros((0, 3)),
        step_flag=np.array(cols["step"], dtype=bool),
        velocity=velocity,
    )
