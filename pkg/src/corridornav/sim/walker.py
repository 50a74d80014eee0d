"""Parameters and noise processes for the simulated walker.

The walker produces steps of slightly varying length at a roughly
constant cadence. Heading wander is an Ornstein-Uhlenbeck process
applied to the step direction, so steps always have exactly their
sampled length while the track weaves around the intended line. The
device azimuth it reports carries white noise plus a slow constant-rate
drift, the dominant error source of consumer orientation tracking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ScenarioError


@dataclass
class WalkerModel:
    step_length_m: float = 0.65
    step_sigma_m: float = 0.03
    cadence_hz: float = 1.8
    cadence_jitter: float = 0.05      # fractional jitter on step intervals
    azimuth_noise_deg: float = 4.0    # white, per sample
    azimuth_drift_deg_per_min: float = 0.0
    heading_wander_deg: float = 5.0   # stationary sigma of the OU wander
    heading_reversion: float = 0.5    # OU mean reversion per step
    compliance: float = 1.0           # chance a route turn is taken unprompted
    turn_lag_steps: int = 0           # overshoot before an executed turn
    reaction_delay_s: float = 1.2     # warning heard -> retrace begins
    device_tilt_deg: float = 25.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.compliance <= 1.0:
            raise ScenarioError("compliance must be a probability in [0, 1]")
        if self.cadence_hz <= 0:
            raise ScenarioError("cadence must be positive")

    @property
    def reaction_delay_steps(self) -> int:
        return max(1, round(self.reaction_delay_s * self.cadence_hz))

    def to_document(self) -> dict:
        return {
            "step_length_m": self.step_length_m,
            "step_sigma_m": self.step_sigma_m,
            "cadence_hz": self.cadence_hz,
            "cadence_jitter": self.cadence_jitter,
            "azimuth_noise_deg": self.azimuth_noise_deg,
            "azimuth_drift_deg_per_min": self.azimuth_drift_deg_per_min,
            "heading_wander_deg": self.heading_wander_deg,
            "heading_reversion": self.heading_reversion,
            "compliance": self.compliance,
            "turn_lag_steps": self.turn_lag_steps,
            "reaction_delay_s": self.reaction_delay_s,
            "device_tilt_deg": self.device_tilt_deg,
        }


def walker_from_document(doc: dict) -> WalkerModel:
    return WalkerModel(**doc)


class WalkerNoise:
    """Seeded noise streams for one walk."""

    def __init__(self, model: WalkerModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self._wander = 0.0

    def step_length(self) -> float:
        l = self.rng.normal(self.model.step_length_m, self.model.step_sigma_m)
        return max(0.1, float(l))

    def step_interval(self) -> float:
        base = 1.0 / self.model.cadence_hz
        jitter = self.rng.normal(0.0, self.model.cadence_jitter * base)
        return max(0.25 * base, base + jitter)

    def heading_wander(self) -> float:
        """One OU update; returns the current wander angle in radians."""
        sigma = math.radians(self.model.heading_wander_deg)
        theta = self.model.heading_reversion
        noise = sigma * math.sqrt(max(0.0, 2.0 * theta - theta * theta))
        self._wander = ((1.0 - theta) * self._wander
                        + self.rng.normal(0.0, noise))
        return self._wander

    def azimuth_noise(self) -> float:
        return math.radians(self.rng.normal(0.0, self.model.azimuth_noise_deg))
