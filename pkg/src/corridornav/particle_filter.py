"""Map-constrained particle filter over step-wise dead reckoning.

Each particle carries a position, a heading-drift correction angle, an
individual step length (step-length mode only) and a weight. The update
cycle per detected step is: propagate every particle by the sensed
displacement under its own correction states, reweight against the floor
plan, read the weighted-mean estimate, then resample.

Reweighting applies three rules: particles whose last movement crossed a
wall are zeroed, particles farther than a compactness threshold from the
weighted mean are zeroed, and particles inside a room are attenuated.
If every weight collapses to zero the filter reinitializes around the
last estimate and flags the reset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import FloorPlan, points_in_any_room, segments_cross_walls

MODE_STEP_AZIMUTH = "step_azimuth"
MODE_VELOCITY = "velocity"


@dataclass
class FilterConfig:
    particle_count: int = 500
    init_drift_sigma_deg: float = 30.0
    init_step_sigma_m: float = 0.06
    drift_noise_sigma_deg: float = 1.0
    modulus_noise_frac: float = 0.5
    phase_noise_sigma_deg: float = 0.5
    resample_jitter_m: float = 0.10
    compact_threshold_step_m: float = 5.5
    compact_threshold_velocity_m: float = 3.5
    room_weight_factor: float = 0.9
    min_step_length_m: float = 0.05
    mode: str = MODE_STEP_AZIMUTH

    def __post_init__(self) -> None:
        if self.particle_count < 1:
            raise ValueError("particle_count must be positive")
        if self.mode not in (MODE_STEP_AZIMUTH, MODE_VELOCITY):
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if not 0.0 <= self.room_weight_factor <= 1.0:
            raise ValueError("room_weight_factor must be in [0, 1]")

    @property
    def compact_threshold_m(self) -> float:
        if self.mode == MODE_STEP_AZIMUTH:
            return self.compact_threshold_step_m
        return self.compact_threshold_velocity_m

    def to_document(self) -> dict:
        return {
            "particle_count": self.particle_count,
            "init_drift_sigma_deg": self.init_drift_sigma_deg,
            "init_step_sigma_m": self.init_step_sigma_m,
            "drift_noise_sigma_deg": self.drift_noise_sigma_deg,
            "modulus_noise_frac": self.modulus_noise_frac,
            "phase_noise_sigma_deg": self.phase_noise_sigma_deg,
            "resample_jitter_m": self.resample_jitter_m,
            "compact_threshold_step_m": self.compact_threshold_step_m,
            "compact_threshold_velocity_m": self.compact_threshold_velocity_m,
            "room_weight_factor": self.room_weight_factor,
            "min_step_length_m": self.min_step_length_m,
            "mode": self.mode,
        }


@dataclass
class FilterState:
    positions: np.ndarray          # (N, 2)
    drift: np.ndarray              # (N,) radians
    step_lengths: np.ndarray | None  # (N,) meters, step mode only
    weights: np.ndarray            # (N,)
    estimate: np.ndarray           # (2,)
    rng: np.random.Generator
    calibrated_step_m: float
    step_count: int = 0
    reset_count: int = 0
    last_reset: bool = False
    last_move_from: np.ndarray | None = field(default=None, repr=False)

    @property
    def particle_count(self) -> int:
        return len(self.weights)


def effective_sample_size(weights: np.ndarray) -> float:
    s = float(np.sum(np.square(weights)))
    return 1.0 / s if s > 0 else 0.0


def _sample_step_lengths(rng: np.random.Generator, n: int, mean: float,
                         config: FilterConfig) -> np.ndarray:
    lengths = rng.normal(mean, config.init_step_sigma_m, n)
    return np.maximum(lengths, config.min_step_length_m)


def init_filter(start, step_length_m: float, config: FilterConfig,
                seed: int | np.random.Generator = 0) -> FilterState:
    """All particles at the known start, with sampled drift and step lengths."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = config.particle_count
    start = np.asarray(start, dtype=float).reshape(2)
    positions = np.tile(start, (n, 1))
    drift = rng.normal(0.0, math.radians(config.init_drift_sigma_deg), n)
    step_lengths = None
    if config.mode == MODE_STEP_AZIMUTH:
        step_lengths = _sample_step_lengths(rng, n, step_length_m, config)
    weights = np.full(n, 1.0 / n)
    return FilterState(positions=positions, drift=drift, step_lengths=step_lengths,
                       weights=weights, estimate=start.copy(), rng=rng,
                       calibrated_step_m=step_length_m)


def propagate(state: FilterState, displacement, config: FilterConfig) -> FilterState:
    """Move every particle by the sensed step displacement.

    The displacement is rotated by the particle's drift angle; in step
    mode its modulus is replaced by the particle's own step length. The
    drift state then diffuses, and modulus and phase noise are applied
    before the move is added to the particle position.
    """
    n = state.particle_count
    rng = state.rng
    dp = np.asarray(displacement, dtype=float).reshape(2)
    base_phase = math.atan2(dp[1], dp[0])
    base_modulus = float(np.hypot(dp[0], dp[1]))

    phase = base_phase + state.drift
    if config.mode == MODE_STEP_AZIMUTH:
        modulus = state.step_lengths.copy()
    else:
        modulus = np.full(n, base_modulus)

    state.drift = state.drift + rng.normal(
        0.0, math.radians(config.drift_noise_sigma_deg), n)
    modulus = modulus + rng.normal(0.0, 1.0, n) * (config.modulus_noise_frac * modulus)
    phase = phase + rng.normal(0.0, math.radians(config.phase_noise_sigma_deg), n)

    move = np.column_stack([modulus * np.cos(phase), modulus * np.sin(phase)])
    state.last_move_from = state.positions.copy()
    state.positions = state.positions + move
    state.step_count += 1
    state.last_reset = False
    return state


def _reset(state: FilterState, config: FilterConfig) -> None:
    """Reinitialize the cloud around the last estimate after a collapse."""
    n = state.particle_count
    state.positions = np.tile(state.estimate, (n, 1))
    state.drift = state.rng.normal(0.0, math.radians(config.init_drift_sigma_deg), n)
    if config.mode == MODE_STEP_AZIMUTH:
        state.step_lengths = _sample_step_lengths(
            state.rng, n, state.calibrated_step_m, config)
    state.weights = np.full(n, 1.0 / n)
    state.last_move_from = None
    state.reset_count += 1
    state.last_reset = True


def reweight(state: FilterState, plan: FloorPlan, config: FilterConfig) -> FilterState:
    """Apply the map constraints to the particle weights.

    Wall crossings zero a particle, distance from the weighted mean
    beyond the compactness threshold zeroes it, and room membership
    attenuates it. Total collapse triggers a reset around the estimate.
    """
    w = state.weights.copy()
    mean = np.average(state.positions, axis=0, weights=w)

    if state.last_move_from is not None and plan.wall_count:
        crossed = segments_cross_walls(state.last_move_from, state.positions, plan)
        w[crossed] = 0.0

    dist = np.linalg.norm(state.positions - mean, axis=1)
    w[dist > config.compact_threshold_m] = 0.0

    if plan.rooms:
        in_room = points_in_any_room(state.positions, plan)
        w[in_room] *= config.room_weight_factor

    total = float(w.sum())
    if total <= 0.0:
        _reset(state, config)
        return state
    state.weights = w / total
    state.estimate = np.average(state.positions, axis=0, weights=state.weights)
    return state


def resample(state: FilterState, config: FilterConfig) -> FilterState:
    """Draw a fresh cloud with replacement, proportionally to weight.

    Survivors are cloned with a small positional jitter and uniform
    weights; drift and step-length states are inherited unchanged.
    """
    n = state.particle_count
    idx = state.rng.choice(n, size=n, replace=True, p=state.weights)
    state.positions = state.positions[idx] + state.rng.normal(
        0.0, config.resample_jitter_m, (n, 2))
    state.drift = state.drift[idx]
    if state.step_lengths is not None:
        state.step_lengths = state.step_lengths[idx]
    if state.last_move_from is not None:
        state.last_move_from = state.last_move_from[idx]
    state.weights = np.full(n, 1.0 / n)
    return state


def step_update(state: FilterState, displacement, plan: FloorPlan,
                config: FilterConfig) -> tuple[FilterState, np.ndarray]:
    """One full filter cycle; returns the post-reweight estimate.

    On a collapse-triggered reset the resampling stage is skipped for
    that step, since the cloud has just been rebuilt.
    """
    propagate(state, displacement, config)
    reweight(state, plan, config)
    estimate = state.estimate.copy()
    if not state.last_reset:
        resample(state, config)
    return state, estimate
