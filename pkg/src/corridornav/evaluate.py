"""Post-run metrics for simulated walks.

Everything returns plain dicts so results can be dumped as JSON from
the command line and compared across runs.
"""
from __future__ import annotations

import numpy as np

from .pdr import ORIENTATION_CALIBRATION_STEPS, as_displacement, initial_orientation
from .route_graph import wrap_angle
from .trace import SensorTrace


def dead_reckoning_path(trace: SensorTrace, step_length_m: float,
                        known_heading: float, start) -> np.ndarray:
    """Positions after each step using uncorrected dead reckoning.

    Mirrors the live pipeline's warm-up: the first few steps establish
    the azimuth offset, then displacements accumulate with no map help.
    Returns an (n_steps, 2) array aligned with the trace's step events.
    """
    steps = trace.step_indices()
    az = trace.azimuth[steps]
    disp = np.vstack([as_displacement(step_length_m, a) for a in az])
    n_cal = min(ORIENTATION_CALIBRATION_STEPS, len(disp))
    offset = initial_orientation(disp[:n_cal], known_heading)
    pos = np.asarray(start, dtype=float).copy()
    out = []
    for a in az:
        pos = pos + as_displacement(step_length_m, wrap_angle(a + offset))
        out.append(pos.copy())
    return np.vstack(out) if out else np.empty((0, 2))


def _error_stats(errors: np.ndarray) -> dict:
    if len(errors) == 0:
        return {"count": 0}
    return {
        "count": int(len(errors)),
        "mean_m": float(np.mean(errors)),
        "median_m": float(np.median(errors)),
        "p95_m": float(np.percentile(errors, 95)),
        "max_m": float(np.max(errors)),
        "final_m": float(errors[-1]),
    }


def evaluate_wayfinding(result) -> dict:
    """Per-step position error of the filter, with a raw-tracking baseline."""
    session = result.session
    phase = result.phase_logs[-1]
    truth = phase.truth
    est = np.array([[row.x, row.y] for row in session.estimate_rows])
    n = min(len(truth), len(est))
    errors = np.hypot(*(est[:n] - truth[:n]).T) if n else np.empty(0)

    raw = dead_reckoning_path(phase.trace, session.step_length_m,
                              session.known_heading, session.start)
    m = min(len(truth), len(raw))
    raw_errors = np.hypot(*(raw[:m] - truth[:m]).T) if m else np.empty(0)

    resets = sum(1 for row in session.estimate_rows if row.reset)
    emitted = [e for e in session.guidance.log if e.status == "emitted"]
    return {
        "scenario": result.name,
        "pipeline": result.pipeline,
        "outcome": result.outcome,
        "expected_outcome": result.expected_outcome,
        "arrived": bool(session.arrived),
        "steps": int(len(truth)),
        "filter_error": _error_stats(errors),
        "raw_error": _error_stats(raw_errors),
        "filter_resets": int(resets),
        "recoveries": int(sum(p.recoveries for p in result.phase_logs)),
        "notifications_emitted": int(len(emitted)),
        "wall_seconds": float(result.wall_seconds),
    }


def evaluate_backtrack(result) -> dict:
    """Alignment quality and arrival stats for a recorded-return run."""
    session = result.session
    rows = session.rows
    reliable = sum(1 for r in rows if r.reliable)
    layer_hist: dict[str, int] = {}
    for r in rows:
        key = str(r.layer_deg)
        layer_hist[key] = layer_hist.get(key, 0) + 1
    divergences = [r.divergence_steps for r in rows]
    emitted = [e for e in session.guidance.log if e.status == "emitted"]
    doc = {
        "scenario": result.name,
        "pipeline": result.pipeline,
        "outcome": result.outcome,
        "expected_outcome": result.expected_outcome,
        "arrived": bool(session.arrived),
        "lost": bool(session.lost),
        "return_steps": int(len(rows)),
        "reliable_fraction": float(reliable / len(rows)) if rows else 0.0,
        "max_divergence_steps": float(max(divergences)) if divergences else 0.0,
        "layer_histogram": layer_hist,
        "recoveries": int(sum(p.recoveries for p in result.phase_logs)),
        "notifications_emitted": int(len(emitted)),
        "wall_seconds": float(result.wall_seconds),
    }
    if result.record is not None and result.simplified is not None:
        doc["recorded_steps"] = int(result.record.total_steps)
        doc["simplified_steps"] = int(result.simplified.total_steps)
    return doc


def evaluate_result(result) -> dict:
    if result.pipeline == "wayfinding":
        return evaluate_wayfinding(result)
    return evaluate_backtrack(result)
