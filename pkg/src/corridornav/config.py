"""Single home for every tunable constant, with JSON round-trip.

Each pipeline stage has its own section; defaults here are the values
the rest of the package uses when no config file is given. Unknown keys
in a config document are rejected so typos fail loudly instead of
silently falling back to defaults.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from . import backtrack, pdr
from .errors import CorridorNavError
from .guidance import GuidanceConfig
from .particle_filter import FilterConfig


@dataclass
class PdrConfig:
    step_length_min_m: float = pdr.STEP_LENGTH_BOUNDS_M[0]
    step_length_max_m: float = pdr.STEP_LENGTH_BOUNDS_M[1]
    velocity_multiplier_min: float = pdr.VELOCITY_MULTIPLIER_BOUNDS[0]
    velocity_multiplier_max: float = pdr.VELOCITY_MULTIPLIER_BOUNDS[1]
    orientation_calibration_steps: int = pdr.ORIENTATION_CALIBRATION_STEPS
    min_calibration_net_displacement_m: float = pdr.MIN_CALIBRATION_NET_DISPLACEMENT_M
    turn_smoothing_window: int = pdr.TURN_SMOOTHING_WINDOW
    turn_stable_steps: int = pdr.TURN_STABLE_STEPS

    def to_document(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class BacktrackConfig:
    samples_per_step: int = backtrack.SAMPLES_PER_STEP
    simplify_radius_steps: int = backtrack.SIMPLIFY_RADIUS_STEPS
    alignment_window_samples: int = backtrack.ALIGNMENT_WINDOW_SAMPLES
    tail_samples: int = backtrack.TAIL_SAMPLES
    tail_slope_min: float = backtrack.TAIL_SLOPE_BOUNDS[0]
    tail_slope_max: float = backtrack.TAIL_SLOPE_BOUNDS[1]
    tail_max_rms: float = backtrack.TAIL_MAX_RMS
    skip_cost_floor: float = backtrack.SKIP_COST_FLOOR
    skip_cost_fraction: float = backtrack.SKIP_COST_FRACTION
    layer_cost_factor: float = backtrack.LAYER_COST_FACTOR
    lost_after_pinned_columns: int = backtrack.LOST_AFTER_PINNED_COLUMNS
    vertex_snap_steps: int = backtrack.VERTEX_SNAP_STEPS

    def to_document(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class AppConfig:
    pdr: PdrConfig
    filter: FilterConfig
    guidance: GuidanceConfig
    backtrack: BacktrackConfig

    def to_document(self) -> dict:
        return {
            "pdr": self.pdr.to_document(),
            "filter": self.filter.to_document(),
            "guidance": self.guidance.to_document(),
            "backtrack": self.backtrack.to_document(),
        }


def default_config() -> AppConfig:
    return AppConfig(pdr=PdrConfig(), filter=FilterConfig(),
                     guidance=GuidanceConfig(), backtrack=BacktrackConfig())


_SECTIONS = {
    "pdr": PdrConfig,
    "filter": FilterConfig,
    "guidance": GuidanceConfig,
    "backtrack": BacktrackConfig,
}


def _build_section(name: str, cls, doc: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise CorridorNavError(
            f"unknown keys in config section {name!r}: {sorted(unknown)}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise CorridorNavError(f"bad config section {name!r}: {exc}") from exc


def load_config(source) -> AppConfig:
    """Read an AppConfig from a path, a JSON string or a parsed dict.

    Missing sections keep their defaults; missing keys within a section
    keep theirs.
    """
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    if not isinstance(doc, dict):
        raise CorridorNavError("config document must be a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise CorridorNavError(f"unknown config sections: {sorted(unknown)}")
    parts = {}
    for name, cls in _SECTIONS.items():
        parts[name] = _build_section(name, cls, doc.get(name, {}))
    return AppConfig(**parts)


def dump_config(config: AppConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_document(), indent=2) + "\n")
