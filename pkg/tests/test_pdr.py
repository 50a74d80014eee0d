"""Dead-reckoning primitives: calibration, displacement, turns, features."""
from __future__ import annotations

import math

import numpy as np
import pytest

from corridornav.errors import CalibrationError
from corridornav.pdr import (
    as_displacement,
    calibrate_step_length,
    calibrate_velocity_multiplier,
    detect_turns,
    initial_orientation,
    integrate_velocity,
    magnetic_feature,
    magnetic_features,
)
from corridornav.route_graph import wrap_angle

from oracles import quadrature_displacement


# -- calibration --------------------------------------------------------------

def test_step_length_from_known_path():
    assert calibrate_step_length(75, 38.25) == pytest.approx(0.51)
    assert calibrate_step_length(20, 10.0) == pytest.approx(0.5)


def test_step_length_out_of_range_rejected():
    with pytest.raises(CalibrationError):
        calibrate_step_length(5, 10.0)   # 2.0 m per step
    with pytest.raises(CalibrationError):
        calibrate_step_length(100, 10.0)  # 0.1 m per step
    with pytest.raises(CalibrationError):
        calibrate_step_length(0, 10.0)


def test_velocity_multiplier():
    assert calibrate_velocity_multiplier(38.25, 39.84) == pytest.approx(0.96, abs=0.005)
    assert calibrate_velocity_multiplier(38.25, 31.61) == pytest.approx(1.21, abs=0.005)
    assert calibrate_velocity_multiplier(12.0, 12.0) == 1.0


def test_velocity_multiplier_out_of_range_rejected():
    with pytest.raises(CalibrationError):
        calibrate_velocity_multiplier(10.0, 1.0)
    with pytest.raises(CalibrationError):
        calibrate_velocity_multiplier(1.0, 10.0)


# -- per-step displacement ------------------------------------------------------

def test_displacement_cardinal_directions():
    assert np.allclose(as_displacement(0.5, 0.0), [0.5, 0.0])
    assert np.allclose(as_displacement(0.5, math.pi / 2), [0.0, 0.5])


def test_displacement_norm_equals_step_length():
    rng = np.random.default_rng(3)
    for _ in range(200):
        azimuth = rng.uniform(-math.pi, math.pi)
        length = rng.uniform(0.3, 1.1)
        d = as_displacement(length, azimuth)
        assert abs(float(np.hypot(*d)) - length) < 1e-12


# -- velocity integration --------------------------------------------------------

def test_constant_velocity_integral():
    t = np.array([0.0, 0.25, 0.5])
    v = np.array([[1.0, 0.0]] * 3)
    assert np.allclose(integrate_velocity(t, v), [0.5, 0.0])
    assert np.allclose(integrate_velocity(t, v, multiplier=1.21), [0.605, 0.0])


def test_piecewise_linear_matches_quadrature():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(3, 12))
        t = np.sort(rng.uniform(0.0, 2.0, n))
        t[-1] = t[0] + max(t[-1] - t[0], 0.2)  # keep a non-trivial span
        v = rng.uniform(-1.5, 1.5, (n, 2))
        t0 = float(rng.uniform(t[0], t[0] + 0.3 * (t[-1] - t[0])))
        t1 = float(rng.uniform(t0, t[-1]))
        got = integrate_velocity(t, v, multiplier=1.0, t_start=t0, t_end=t1)
        want = quadrature_displacement(t, v, 1.0, t0, t1)
        assert np.allclose(got, want, atol=1e-6)


def test_integral_linear_in_multiplier():
    t = np.array([0.0, 0.3, 0.7, 1.0])
    v = np.array([[1.0, -0.5], [0.2, 0.1], [-0.4, 0.9], [0.0, 0.3]])
    base = integrate_velocity(t, v, multiplier=1.0)
    for m in (0.6, 1.21, 1.9):
        assert np.array_equal(integrate_velocity(t, v, multiplier=m), m * base)


def test_empty_step_interval_rejected():
    with pytest.raises(ValueError, match="empty step interval"):
        integrate_velocity(np.array([]), np.zeros((0, 2)))
    with pytest.raises(ValueError, match="empty step interval"):
        integrate_velocity(np.array([1.0, 2.0]), np.ones((2, 2)),
                           t_start=1.5, t_end=1.2)


def test_single_sample_needs_explicit_bounds():
    t = np.array([1.0])
    v = np.array([[2.0, 0.0]])
    with pytest.raises(ValueError, match="empty step interval"):
        integrate_velocity(t, v)
    got = integrate_velocity(t, v, t_start=0.5, t_end=1.5)
    assert np.allclose(got, [2.0, 0.0])  # constant extrapolation


# -- initial orientation -----------------------------------------------------------

def test_orientation_aligned_case():
    disp = np.tile([0.6, 0.0], (6, 1))
    assert initial_orientation(disp, 0.0) == pytest.approx(0.0)


def test_orientation_quarter_turn():
    disp = np.tile([0.6, 0.0], (6, 1))
    assert initial_orientation(disp, math.pi / 2) == pytest.approx(math.pi / 2)


def test_orientation_recovers_noisy_heading():
    rng = np.random.default_rng(8)
    sigma = math.radians(3.0)
    for _ in range(20):
        azimuths = rng.normal(math.radians(30.0), sigma, 6)
        disp = np.vstack([as_displacement(0.65, a) for a in azimuths])
        rotation = initial_orientation(disp, math.radians(120.0))
        assert abs(wrap_angle(rotation - math.pi / 2)) < math.radians(5.0)


def test_orientation_degenerate_walk_rejected():
    # Out-and-back: net displacement stays under half a meter.
    disp = np.array([[0.6, 0.0], [-0.6, 0.0]] * 3)
    with pytest.raises(CalibrationError):
        initial_orientation(disp, 0.0)


def test_orientation_needs_exactly_six_steps():
    with pytest.raises(ValueError):
        initial_orientation(np.tile([0.6, 0.0], (5, 1)), 0.0)


# -- turn detection -------------------------------------------------------------------

def _quantized_endpoint_difference(azimuths) -> int:
    return round((azimuths[-1] - azimuths[0]) / (math.pi / 2))


def test_constant_azimuth_no_turns():
    assert detect_turns([0.3] * 40) == []


def test_single_ramp_turn():
    azimuths = [0.0] * 10 + [math.radians(30), math.radians(60)] + [math.pi / 2] * 15
    events = detect_turns(azimuths)
    assert len(events) == 1
    assert events[0].angle == pytest.approx(math.pi / 2)
    assert 8 <= events[0].step_index <= 14  # inside the ramp, give or take smoothing
    assert sum(round(e.angle / (math.pi / 2)) for e in events) \
        == _quantized_endpoint_difference(azimuths)


def test_two_separated_ramps():
    ramp = [math.radians(30), math.radians(60)]
    azimuths = ([0.0] * 10 + ramp + [math.pi / 2] * 20
                + [math.radians(120), math.radians(150)] + [math.pi] * 12)
    events = detect_turns(azimuths)
    assert [pytest.approx(e.angle) for e in events] == [math.pi / 2, math.pi / 2]
    assert sum(round(e.angle / (math.pi / 2)) for e in events) \
        == _quantized_endpoint_difference(azimuths)


def test_quick_double_quarter_merges_to_half_turn():
    azimuths = [0.0] * 12 + [math.pi] * 12
    events = detect_turns(azimuths)
    assert len(events) == 1
    assert events[0].angle == pytest.approx(math.pi)


def test_time_reversal_negates_turns():
    azimuths = ([0.0] * 12 + [math.pi / 2] * 12 + [math.pi] * 12
                + [math.pi / 2] * 12)
    forward = detect_turns(azimuths)
    backward = detect_turns(azimuths[::-1])

    def negate(angle: float) -> float:
        flipped = wrap_angle(-angle)
        return math.pi if flipped == -math.pi else flipped

    assert [e.angle for e in backward] \
        == pytest.approx([negate(e.angle) for e in reversed(forward)])


def test_closed_loop_turns_sum_to_full_circle():
    # Four corners of a rectangle: the last plateau faces the start again.
    plateaus = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi]
    azimuths = [wrap_angle(a) for a in plateaus for _ in range(12)]
    events = detect_turns(azimuths)
    assert sum(e.angle for e in events) == pytest.approx(2 * math.pi)
    clockwise = [wrap_angle(-a) for a in plateaus for _ in range(12)]
    events = detect_turns(clockwise)
    assert sum(e.angle for e in events) == pytest.approx(-2 * math.pi)


# -- magnetic features ---------------------------------------------------------------

def test_feature_vertical_field():
    assert np.allclose(magnetic_feature([0, 0, 50], [0, 0, 1]), [50.0, 0.0])


def test_feature_tilted_field():
    assert np.allclose(magnetic_feature([30, 0, 40], [0, 0, 1]), [40.0, 30.0])


def test_feature_rotation_invariant():
    rng = np.random.default_rng(13)
    for _ in range(50):
        m = rng.uniform(-60, 60, 3)
        g = np.array([0.0, 0.0, 1.0])
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1.0
        base = magnetic_feature(m, g)
        rotated = magnetic_feature(q @ m, q @ g)
        assert np.allclose(base, rotated, atol=1e-9)


def test_batch_features_match_scalar():
    rng = np.random.default_rng(14)
    m = rng.uniform(-60, 60, (16, 3))
    g = rng.normal(size=(16, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    batch = magnetic_features(m, g)
    for k in range(16):
        assert np.allclose(batch[k], magnetic_feature(m[k], g[k]), atol=1e-12)
