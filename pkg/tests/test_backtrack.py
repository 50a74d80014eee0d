"""Backtracking record, simplification, alignment and projection tests."""

import json
import math

import numpy as np
import pytest

from corridornav.backtrack import (
    OnlineAligner,
    ProjectedSequence,
    ReliableMatch,
    WayInRecord,
    advance_projection,
    dump_record,
    load_record,
    quarter_turns,
    record_way_in,
    reliable_match_test,
    simplify,
    tail_regression,
)
from corridornav.errors import RecordError
from corridornav.pdr import TurnEvent

from oracles import full_lattice_alignment, line_fit_qr, quarter_turns_ref

LEFT = math.pi / 2
RIGHT = -math.pi / 2


def _features(rng, steps):
    # widely spread features so only the true sample matches at zero cost
    return rng.normal(0.0, 5.0, (3 * steps, 2))


def _record(segments, turn_angles, rng=None, step_length=0.65):
    rng = rng or np.random.default_rng(0)
    boundaries = np.cumsum(segments)[:-1]
    turns = [TurnEvent(int(b), a) for b, a in zip(boundaries, turn_angles)]
    return WayInRecord(list(segments), turns, _features(rng, sum(segments)),
                       step_length)


# ---------------------------------------------------------------------------
# quarter-turn quantization
# ---------------------------------------------------------------------------


def test_quarter_turns_matches_reference():
    rng = np.random.default_rng(7)
    for angle in rng.uniform(-10.0, 10.0, 300):
        assert quarter_turns(float(angle)) == quarter_turns_ref(float(angle))
    assert quarter_turns(-math.pi) == 2  # straight-behind maps to +2, not -2
    assert quarter_turns(math.pi) == 2
    assert quarter_turns(0.2) == 0


# ---------------------------------------------------------------------------
# recording
# ---------------------------------------------------------------------------


def test_record_straight_walk_single_segment():
    times = np.arange(1.0, 21.0)
    feat_t = np.linspace(0.0, 20.0, 201)
    feats = np.column_stack([feat_t, 2.0 * feat_t])
    rec = record_way_in(times, [], feat_t, feats, 0.65)
    assert rec.segments == [20]
    assert rec.turns == []
    assert len(rec.samples) == 60
    # default session start backs off one median step interval, so samples
    # land at thirds of each one-second interval
    expected_t = (np.arange(60) + 1) / 3.0
    assert np.allclose(rec.samples[:, 0], expected_t, atol=1e-12)
    assert np.allclose(rec.samples[:, 1], 2.0 * expected_t, atol=1e-12)


def test_record_turn_splits_segments():
    times = np.arange(1.0, 21.0)
    feat_t = np.linspace(0.0, 21.0, 100)
    feats = np.zeros((100, 2))
    rec = record_way_in(times, [TurnEvent(10, 1.7)], feat_t, feats, 0.6)
    assert rec.segments == [10, 10]
    assert len(rec.turns) == 1
    assert rec.turns[0].step_index == 10
    # 1.7 rad is nearest to one quarter turn and is stored snapped
    assert rec.turns[0].angle == pytest.approx(math.pi / 2, abs=1e-12)


def test_record_merges_and_cancels_turns_at_same_boundary():
    times = np.arange(1.0, 11.0)
    feat_t = np.linspace(0.0, 11.0, 50)
    feats = np.zeros((50, 2))
    # two eighth turns on the same boundary add up to a quarter
    rec = record_way_in(times, [TurnEvent(5, math.pi / 4), TurnEvent(5, math.pi / 4)],
                        feat_t, feats, 0.6)
    assert rec.segments == [5, 5]
    assert quarter_turns(rec.turns[0].angle) == 1
    # opposite quarter turns cancel and leave a straight walk
    rec = record_way_in(times, [TurnEvent(5, LEFT), TurnEvent(5, RIGHT)],
                        feat_t, feats, 0.6)
    assert rec.segments == [10]


def test_record_clamps_turn_index_into_walk():
    times = np.arange(1.0, 11.0)
    feat_t = np.linspace(0.0, 11.0, 50)
    feats = np.zeros((50, 2))
    rec = record_way_in(times, [TurnEvent(99, LEFT)], feat_t, feats, 0.6)
    assert rec.segments == [9, 1]


def test_record_rejects_empty_walk():
    with pytest.raises(RecordError):
        record_way_in([], [], [0.0], [[0.0, 0.0]], 0.6)


def test_record_validation():
    good = _record([5, 5], [LEFT])
    with pytest.raises(RecordError):  # sample count mismatch
        WayInRecord([5, 5], good.turns, good.samples[:-3], 0.65)
    with pytest.raises(RecordError):  # turn off the segment boundary
        WayInRecord([5, 5], [TurnEvent(4, LEFT)], good.samples, 0.65)
    with pytest.raises(RecordError):  # angle quantizes to zero quarters
        WayInRecord([5, 5], [TurnEvent(5, 0.1)], good.samples, 0.65)
    with pytest.raises(RecordError):  # empty segment
        WayInRecord([10, 0], [TurnEvent(10, LEFT)], good.samples, 0.65)
    bad = good.samples.copy()
    bad[0, 0] = math.nan
    with pytest.raises(RecordError):
        WayInRecord([5, 5], good.turns, bad, 0.65)


def test_record_document_round_trip():
    rec = _record([4, 6, 3], [LEFT, RIGHT])
    back = load_record(dump_record(rec))
    assert back.segments == rec.segments
    assert [t.step_index for t in back.turns] == [4, 10]
    assert np.allclose(back.samples, rec.samples, atol=1e-9)
    assert back.step_length_m == rec.step_length_m
    assert back.lossy == rec.lossy
    with pytest.raises(RecordError):
        load_record(json.dumps({"schema": "other/9"}))


def test_record_geometry_helpers():
    rec = _record([3, 2], [LEFT])
    assert np.array_equal(rec.net_displacement(), [3.0, 2.0])
    assert np.array_equal(rec.polyline(), [[0, 0], [3, 0], [3, 2]])
    dirs = rec.step_directions()
    assert dirs.tolist() == [0, 0, 0, 1, 1]
    # a left turn on the way in reads as a right turn walking back
    segments, directions = rec.reversed_directions()
    assert segments == [2, 3]
    assert directions == [0, 3]


def test_reversed_turn_angles_positions():
    rec = _record([10, 10], [LEFT])
    fwd = rec.sample_turn_angles()
    assert fwd[29] == pytest.approx(LEFT)
    assert np.count_nonzero(fwd) == 1
    rev = rec.reversed_turn_angles()
    assert rev[30] == pytest.approx(RIGHT)
    assert np.count_nonzero(rev) == 1


# ---------------------------------------------------------------------------
# simplification
# ---------------------------------------------------------------------------


def test_simplify_keeps_clean_walk():
    rec = _record([10, 10], [LEFT])
    simp = simplify(rec)
    assert simp.segments == [10, 10]
    assert [quarter_turns(t.angle) for t in simp.turns] == [1]
    assert np.array_equal(simp.samples, rec.samples)
    assert not simp.lossy


def test_simplify_cuts_equal_arm_spur():
    # east 10, out-and-back spur of 5, east 8: the spur vanishes exactly
    rec = _record([10, 5, 5, 8], [LEFT, math.pi, LEFT])
    simp = simplify(rec)
    assert simp.segments == [18]
    assert simp.turns == []
    assert np.array_equal(simp.net_displacement(), rec.net_displacement())
    assert not simp.lossy
    triplets = rec.samples.reshape(-1, 3, 2)
    kept = np.vstack([triplets[:10], triplets[20:]]).reshape(-1, 2)
    assert np.array_equal(simp.samples, kept)


def test_simplify_trims_unequal_spur_to_net():
    # north 6 then back south 2: the overshoot cancels, net 4 north remains
    rec = _record([10, 6, 2, 8], [LEFT, math.pi, LEFT])
    simp = simplify(rec)
    assert simp.segments == [10, 4, 8]
    assert np.array_equal(simp.net_displacement(), rec.net_displacement())
    assert not simp.lossy


def test_simplify_splices_spur_longer_than_radius():
    # an 8-step out-and-back exceeds the exact-cut radius, but its far end
    # revisits the corridor, so the lossy splice takes it instead
    rec = _record([10, 8, 8, 8], [LEFT, math.pi, LEFT])
    simp = simplify(rec, radius_steps=7)
    assert simp.lossy
    assert simp.total_steps < rec.total_steps


def test_simplify_keeps_detour_wider_than_radius():
    # a U-shaped bypass never re-enters the radius of an earlier position
    rec = _record([10, 3, 2, 3, 8], [LEFT, RIGHT, RIGHT, LEFT])
    simp = simplify(rec, radius_steps=7)
    assert simp.segments == [10, 3, 2, 3, 8]
    assert not simp.lossy
    assert np.array_equal(simp.samples, rec.samples)


def test_simplify_splices_revisited_loop_and_flags_lossy():
    # a 10 x 5 loop closes at the start; the walk continues east after it
    rec = _record([10, 5, 10, 5, 3], [LEFT, LEFT, LEFT, LEFT])
    simp = simplify(rec)
    assert simp.lossy
    # the splice rejoins where the path first re-enters the radius, so the
    # leading loop collapses to the short tail that approached the start
    assert simp.segments == [4, 5, 3]
    assert simp.total_steps < rec.total_steps


def test_simplify_rejects_walk_that_cancels_out():
    rec = _record([5, 5], [math.pi])
    with pytest.raises(RecordError):
        simplify(rec)


def test_simplify_idempotent_on_random_records():
    rng = np.random.default_rng(13)
    reduced = 0
    for _ in range(200):
        k = int(rng.integers(1, 6))
        segments = [int(rng.integers(1, 13)) for _ in range(k)]
        quarters = rng.choice([1, 2, 3], size=k - 1)
        angles = [{1: LEFT, 2: math.pi, 3: RIGHT}[int(q)] for q in quarters]
        rec = _record(segments, angles, rng=rng)
        try:
            once = simplify(rec)
        except RecordError:
            continue  # walk cancels to nothing within the radius
        if once.total_steps < rec.total_steps:
            reduced += 1
        twice = simplify(once)
        assert twice.segments == once.segments
        assert [t.angle for t in twice.turns] == [t.angle for t in once.turns]
        assert np.array_equal(twice.samples, once.samples)
        assert twice.lossy == once.lossy
    assert reduced > 10  # the sample must actually exercise the reductions


# ---------------------------------------------------------------------------
# alignment
# ---------------------------------------------------------------------------


def test_self_alignment_rides_the_diagonal():
    rng = np.random.default_rng(3)
    rec = _record([10, 10, 10], [LEFT, RIGHT], rng=rng)
    aligner = OnlineAligner(rec)
    rev_f = rec.reversed_features()
    rev_t = rec.reversed_turn_angles()
    for j in range(len(rev_f)):
        result = aligner.push(rev_f[j], rev_t[j])
        assert result.way_in_index == j
        assert result.cost == 0.0
        assert result.layer_deg == 0
        assert not result.lost
        if j >= 20:
            # a full tail of one-to-one advances is available and reliable
            assert result.reliable is not None
            assert result.reliable.way_in_index == j
        else:
            assert result.reliable is None


def test_constant_feed_stalls_without_reliable_match():
    rng = np.random.default_rng(3)
    rec = _record([20], [], rng=rng)
    aligner = OnlineAligner(rec, skip_cost=0.5)
    anchor = rec.reversed_features()[5]
    results = [aligner.push(anchor, 0.0) for _ in range(40)]
    # repeating one sample parks the endpoint on its unique best match
    assert all(r.way_in_index == 5 for r in results[10:])
    # a flat endpoint trail has slope zero and never certifies a match
    assert all(r.reliable is None for r in results[25:])


def test_windowed_alignment_matches_full_lattice_when_window_covers():
    rng = np.random.default_rng(11)
    rec = _record([10, 10], [LEFT], rng=rng)  # 60 samples, well under the window
    rev_f = rec.reversed_features()
    rev_t = rec.reversed_turn_angles()
    ret_f = rev_f + rng.normal(0.0, 0.3, rev_f.shape)
    aligner = OnlineAligner(rec, skip_cost=1.0)
    ends, costs = [], []
    for j in range(len(ret_f)):
        r = aligner.push(ret_f[j], rev_t[j])
        ends.append(r.way_in_index)
        costs.append(r.cost)
    oracle_ends, oracle_costs = full_lattice_alignment(
        rev_f, rev_t, ret_f, rev_t, skip_cost=1.0)
    # with the whole record inside the window the lattices are identical
    assert ends == oracle_ends
    assert costs == oracle_costs  # bit-exact, same operations in same order


def test_windowed_alignment_tracks_full_lattice_under_stride_mismatch():
    rng = np.random.default_rng(5)
    rec = _record([30, 30, 30], [LEFT, RIGHT], rng=rng)  # 270 samples
    rev_f = rec.reversed_features()
    rev_t = rec.reversed_turn_angles()
    ret_f, ret_t = [], []
    for k in range(len(rev_f)):
        ret_f.append(rev_f[k])
        ret_t.append(rev_t[k])
        if k % 10 == 9:  # duplicate every tenth sample: 10% stride mismatch
            ret_f.append(rev_f[k])
            ret_t.append(0.0)
    ret_f, ret_t = np.asarray(ret_f), np.asarray(ret_t)
    aligner = OnlineAligner(rec, skip_cost=1.0)
    lib = [aligner.push(ret_f[j], ret_t[j]) for j in range(len(ret_f))]
    oracle_ends, oracle_costs = full_lattice_alignment(
        rev_f, rev_t, ret_f, ret_t, skip_cost=1.0)
    agree = 0
    for j, r in enumerate(lib):
        assert abs(r.way_in_index - oracle_ends[j]) <= 3
        if r.way_in_index == oracle_ends[j]:
            agree += 1
            assert r.cost == oracle_costs[j]
    assert agree >= 0.9 * len(lib)


def test_skip_cost_calibrates_from_early_columns():
    rng = np.random.default_rng(9)
    rec = _record([30], [], rng=rng)
    aligner = OnlineAligner(rec)
    rev_f = rec.reversed_features()
    offset = np.array([1.0, 0.0])  # unit node cost on the diagonal
    assert aligner.skip_cost == pytest.approx(0.1)  # floor until calibrated
    for j in range(60):
        aligner.push(rev_f[j] + offset, 0.0)
        if j < 49:
            assert aligner.skip_cost == pytest.approx(0.1)
    # half the median endpoint cost over the first 50 columns
    assert aligner.skip_cost == pytest.approx(0.5, abs=1e-9)


def test_unmatched_live_turn_shows_in_layer():
    rng = np.random.default_rng(21)
    rec = _record([30], [], rng=rng)
    aligner = OnlineAligner(rec, skip_cost=1.0)
    rev_f = rec.reversed_features()
    for j in range(40):
        angle = LEFT if j == 10 else (RIGHT if j == 30 else 0.0)
        result = aligner.push(rev_f[j], angle)
        if 10 <= j < 30:
            assert result.layer_deg == 90
        else:
            assert result.layer_deg == 0
        assert result.way_in_index == j  # the turn penalty hits every path


# ---------------------------------------------------------------------------
# tail regression and reliable matches
# ---------------------------------------------------------------------------


def test_tail_regression_perfect_diagonal():
    i = np.arange(21.0)
    assert tail_regression(i, i) == pytest.approx((1.0, 0.0), abs=1e-12)


def test_tail_regression_degenerate_column():
    assert tail_regression(np.arange(5.0), np.zeros(5)) is None


def test_tail_regression_matches_least_squares_oracle():
    rng = np.random.default_rng(17)
    for _ in range(20):
        j = np.arange(21.0)
        i = 0.97 * j + rng.normal(0.0, 0.8, 21)
        slope, rms = tail_regression(i, j)
        o_slope, o_rms = line_fit_qr(j, i)
        assert slope == pytest.approx(o_slope, abs=1e-9)
        assert rms == pytest.approx(o_rms, abs=1e-9)


def test_jittered_diagonal_still_reliable():
    rng = np.random.default_rng(3)
    rec = _record([20], [], rng=rng)
    aligner = OnlineAligner(rec, skip_cost=1.0)
    rev_f = rec.reversed_features()
    # alternate one sample ahead and behind: slope stays near one and the
    # residual near one sample, both inside the acceptance bands
    last = None
    for j in range(40):
        i = min(max(j + (1 if j % 2 else -1), 0), 59)
        last = aligner.push(rev_f[i], 0.0)
    assert last.reliable is not None
    assert reliable_match_test(aligner) is not None


def test_reliable_match_step_position():
    assert ReliableMatch(59, 59).step_position() == pytest.approx(20.0)
    assert ReliableMatch(0, 0).step_position() == pytest.approx(1 / 3)


# ---------------------------------------------------------------------------
# projected position
# ---------------------------------------------------------------------------


def _seq(segments, directions, position, heading=None):
    match = ReliableMatch(int(position * 3) - 1, 0)
    seq = ProjectedSequence(list(segments), list(directions), match,
                            float(position), 0)
    seq.heading = seq.direction_at(position) if heading is None else heading
    return seq


def test_projection_from_record_reverses_walk():
    rec = _record([10, 5], [LEFT])
    match = ReliableMatch(14, 100)  # sample 14 -> five steps along the return
    seq = ProjectedSequence.from_record(rec, match)
    assert seq.segments == [5, 10]
    assert seq.directions == [0, 3]
    assert seq.position == pytest.approx(5.0)
    assert seq.heading == 3  # already past the corner, heading down the leg


def test_projection_steps_advance_on_path():
    seq = _seq([30], [0], 10.0)
    for _ in range(5):
        advance_projection(seq, ("step",))
    assert seq.position == pytest.approx(15.0)
    assert seq.divergence_steps == 0.0
    assert seq.steps_since_anchor == 5


def test_projection_divergence_grows_and_recovers():
    seq = _seq([30], [0], 10.0)
    advance_projection(seq, ("turn", math.pi))
    for _ in range(16):
        advance_projection(seq, ("step",))
    assert seq.divergence_steps == pytest.approx(16.0)
    assert seq.position == pytest.approx(10.0)  # off-path steps do not advance
    advance_projection(seq, ("turn", math.pi))
    for _ in range(16):
        advance_projection(seq, ("step",))
    assert seq.divergence_steps == pytest.approx(0.0)
    advance_projection(seq, ("step",))
    assert seq.position == pytest.approx(11.0)


def test_projection_turn_snaps_to_nearby_vertex():
    seq = _seq([5, 10], [0, 3], 2.0)
    advance_projection(seq, ("step",))
    advance_projection(seq, ("step",))
    assert seq.position == pytest.approx(4.0)
    advance_projection(seq, ("turn", RIGHT))
    assert seq.heading == 3
    assert seq.position == pytest.approx(5.0)  # snapped onto the corner
    assert seq.divergence_steps == 0.0


def test_projection_no_snap_beyond_radius():
    seq = _seq([20, 5], [0, 3], 2.0)
    advance_projection(seq, ("turn", RIGHT))
    assert seq.heading == 3
    assert seq.position == pytest.approx(2.0)  # corner 18 steps away, too far
    advance_projection(seq, ("step",))
    assert seq.divergence_steps == pytest.approx(1.0)


def test_projection_end_and_re_anchor():
    seq = _seq([10], [0], 9.0)
    advance_projection(seq, ("step",))
    assert seq.at_end()
    assert seq.remaining_steps() == 0.0
    advance_projection(seq, ("step",))  # walking past the end diverges
    assert seq.divergence_steps == pytest.approx(1.0)
    seq.re_anchor(ReliableMatch(14, 200))
    assert seq.position == pytest.approx(5.0)
    assert seq.divergence_steps == 0.0
    assert seq.steps_since_anchor == 0


def test_projection_rejects_unknown_event():
    seq = _seq([10], [0], 0.0)
    with pytest.raises(ValueError):
        advance_projection(seq, ("jump", 2))
