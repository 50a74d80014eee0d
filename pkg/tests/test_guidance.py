"""Notification texts, trigger thresholds and speech arbitration."""

import pytest

from corridornav.guidance import (
    ARRIVED_TEXT,
    GuidanceConfig,
    GuidanceContext,
    GuidanceState,
    SegmentEntry,
    backtracking_guidance,
    describe_route,
    on_update,
    repeat_last,
    segment_entry_message,
    speech_duration,
    spoken_count,
    wayfinding_guidance,
)
from corridornav.route_graph import LandmarkAnnouncement, RouteLeg


def _ctx(**kw):
    kw.setdefault("time_s", 0.0)
    return GuidanceContext(**kw)


def _quiet(state: GuidanceState) -> None:
    # swallow the start announcement so the next update is silent again
    state.speaking_until = -1.0


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_config_rejects_unknown_pipeline_and_units():
    with pytest.raises(ValueError):
        GuidanceConfig(pipeline="driving")
    with pytest.raises(ValueError):
        GuidanceConfig(units="cubits")


def test_thresholds_switch_with_pipeline():
    way = wayfinding_guidance()
    back = backtracking_guidance()
    assert way.turn_ahead_threshold == 7.0
    assert back.turn_ahead_threshold == 14.0
    assert way.wrong_direction_threshold == 4.5
    assert back.wrong_direction_threshold == 16.0
    assert way.announce_next_turn and not back.announce_next_turn


# ---------------------------------------------------------------------------
# counts and template texts
# ---------------------------------------------------------------------------


def test_spoken_count_rounds_half_up():
    assert spoken_count(29.0, "meters", 0.5) == 29
    assert spoken_count(29.5, "meters", 0.5) == 30
    assert spoken_count(29.49, "meters", 0.5) == 29
    assert spoken_count(7.0, "steps", 0.5) == 14
    assert spoken_count(7.0, "feet", 0.5) == 23  # 22.97 ft rounds up
    assert spoken_count(0.0, "steps", 0.5, length_steps=6.2) == 6


def test_segment_entry_texts():
    cfg = wayfinding_guidance()
    entry = SegmentEntry(anchor="leg-0", length_m=29.0, next_turn_direction="right")
    assert segment_entry_message(entry, cfg) == (
        "Walk straight for about 29 meters. Then, you will turn right.")
    entry = SegmentEntry(anchor="leg-0", length_m=7.0)
    assert segment_entry_message(entry, wayfinding_guidance(units="steps")) == (
        "Walk straight for about 14 steps.")
    assert segment_entry_message(entry, wayfinding_guidance(units="feet")) == (
        "Walk straight for about 23 feet.")
    entry = SegmentEntry(anchor="leg-0", length_m=12.0, keep_side="right",
                         next_turn_direction="left")
    assert segment_entry_message(entry, backtracking_guidance()) == (
        "Please keep to the right. Walk straight for about 12 meters.")


def test_describe_route_texts():
    legs = [RouteLeg(27.0, "right", "w1"), RouteLeg(9.0, None, "w2")]
    assert describe_route(legs, "meters", 0.5) == (
        "Walk 27 meters, then turn right, walk 9 meters, "
        "then arrive at destination.")
    assert describe_route([], "meters", 0.5) == ARRIVED_TEXT
    # straight continuations add a walking clause but no turn clause
    legs = [RouteLeg(10.0, "straight", "w1"), RouteLeg(5.0, "left", "w2"),
            RouteLeg(4.0, None, "w3")]
    text = describe_route(legs, "meters", 0.5)
    assert text.count("walk") + text.startswith("Walk") == 3
    assert text.count("turn") == 1


# ---------------------------------------------------------------------------
# trigger evaluation
# ---------------------------------------------------------------------------


def test_first_update_announces_start():
    state = GuidanceState()
    out = on_update(_ctx(), state, wayfinding_guidance())
    assert [n.kind for n in out] == ["start"]
    assert out[0].text == "Please start walking."
    _quiet(state)
    assert on_update(_ctx(time_s=1.0), state, wayfinding_guidance()) == []


def test_turn_ahead_fires_strictly_inside_threshold():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    on_update(_ctx(), state, cfg)
    _quiet(state)
    # exactly at the threshold: still quiet
    ctx = _ctx(time_s=2.0, distance_to_next=7.0, next_kind="turn",
               next_turn_direction="right", junction_token="T", next_anchor="w3")
    assert on_update(ctx, state, cfg) == []
    ctx = _ctx(time_s=3.0, distance_to_next=6.9, next_kind="turn",
               next_turn_direction="right", junction_token="T", next_anchor="w3")
    out = on_update(ctx, state, cfg)
    assert len(out) == 1
    note = out[0]
    assert note.text == "At the upcoming T junction, turn right."
    assert note.time_critical and note.chime and note.vibrate
    # the same junction never re-announces
    _quiet(state)
    ctx = _ctx(time_s=4.0, distance_to_next=5.0, next_kind="turn",
               next_turn_direction="right", junction_token="T", next_anchor="w3")
    assert on_update(ctx, state, cfg) == []


def test_turn_ahead_without_junction_word():
    cfg = backtracking_guidance()
    state = GuidanceState()
    on_update(_ctx(), state, cfg)
    _quiet(state)
    ctx = _ctx(time_s=2.0, distance_to_next=13.0, next_kind="turn",
               next_turn_direction="left", next_anchor="corner-1")
    out = on_update(ctx, state, cfg)
    assert out[0].text == "At the upcoming junction, turn left."


def test_destination_announcement_with_wall_clause():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    on_update(_ctx(), state, cfg)
    _quiet(state)
    ctx = _ctx(time_s=2.0, distance_to_next=6.0, next_kind="destination",
               next_anchor="goal", destination_ends_at_wall=True)
    out = on_update(ctx, state, cfg)
    assert out[0].text == ("Approaching your destination. Your destination is "
                           "just ahead of you. Please stop when you find a wall.")
    assert not out[0].time_critical


def test_straight_ahead_announcement():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    on_update(_ctx(), state, cfg)
    _quiet(state)
    ctx = _ctx(time_s=2.0, distance_to_next=5.0, next_kind="straight",
               next_anchor="w4")
    out = on_update(ctx, state, cfg)
    assert out[0].text == "Keep walking straight."


def test_wrong_direction_levels_and_rearm():
    cfg = wayfinding_guidance()  # threshold 4.5 m
    state = GuidanceState()
    on_update(_ctx(), state, cfg)
    _quiet(state)
    assert on_update(_ctx(time_s=1.0, wrong_direction_accum=4.4), state, cfg) == []
    out = on_update(_ctx(time_s=2.0, wrong_direction_accum=4.6), state, cfg)
    assert [n.kind for n in out] == ["wrong-direction"]
    assert out[0].text == ("You are walking in the wrong direction. "
                           "Please turn around and start walking again.")
    _quiet(state)
    # still above one threshold but below two: no repeat
    assert on_update(_ctx(time_s=3.0, wrong_direction_accum=6.0), state, cfg) == []
    # passing twice the threshold raises the level and re-fires
    out = on_update(_ctx(time_s=4.0, wrong_direction_accum=9.1), state, cfg)
    assert [n.kind for n in out] == ["wrong-direction"]
    _quiet(state)
    # recovering below the threshold re-arms level one under a fresh anchor
    assert on_update(_ctx(time_s=5.0, wrong_direction_accum=0.0), state, cfg) == []
    assert state.wrong_direction_level == 0
    out = on_update(_ctx(time_s=6.0, wrong_direction_accum=13.6), state, cfg)
    assert [n.kind for n in out] == ["wrong-direction"]


def test_landmark_strictly_inside_radius():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    on_update(_ctx(), state, cfg)
    _quiet(state)
    at_radius = LandmarkAnnouncement("bench", "left", 2.0, "bench to the left")
    assert on_update(_ctx(time_s=1.0, landmarks=[at_radius]), state, cfg) == []
    near = LandmarkAnnouncement("bench", "left", 1.9, "bench to the left")
    out = on_update(_ctx(time_s=2.0, landmarks=[near]), state, cfg)
    assert out[0].text == "Landmark nearby. Bench to the left."
    _quiet(state)
    # the same landmark stays silent afterwards
    assert on_update(_ctx(time_s=3.0, landmarks=[near]), state, cfg) == []


def test_new_segment_notification():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    on_update(_ctx(), state, cfg)
    _quiet(state)
    entry = SegmentEntry(anchor="leg-2", length_m=12.0, next_turn_direction="left")
    out = on_update(_ctx(time_s=2.0, segment_entered=entry), state, cfg)
    assert [n.kind for n in out] == ["new-segment"]
    _quiet(state)
    assert on_update(_ctx(time_s=3.0, segment_entered=entry), state, cfg) == []


# ---------------------------------------------------------------------------
# speech arbitration
# ---------------------------------------------------------------------------


def test_time_critical_preempts_current_speech():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    out = on_update(_ctx(), state, cfg)
    assert state.speaking(0.5)  # start message still playing
    ctx = _ctx(time_s=0.5, distance_to_next=3.0, next_kind="turn",
               next_turn_direction="left", junction_token="X", next_anchor="w1")
    out = on_update(ctx, state, cfg)
    assert [n.kind for n in out] == ["turn-ahead"]
    statuses = [(e.kind, e.status) for e in state.log]
    assert ("start", "preempted") in statuses
    assert ("turn-ahead", "emitted") in statuses


def test_non_critical_messages_drop_while_speaking():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    on_update(_ctx(), state, cfg)
    entry = SegmentEntry(anchor="leg-0", length_m=20.0)
    out = on_update(_ctx(time_s=0.2, segment_entered=entry), state, cfg)
    assert out == []
    assert state.log[-1].status == "dropped"
    assert state.log[-1].kind == "new-segment"
    # a dropped anchor is consumed, the message never plays late
    _quiet(state)
    assert on_update(_ctx(time_s=5.0, segment_entered=entry), state, cfg) == []


def test_repeat_last_returns_latest_emitted_text():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    assert repeat_last(state) == ""
    on_update(_ctx(), state, cfg)
    assert repeat_last(state) == "Please start walking."
    # dropped messages do not change the repeat buffer
    entry = SegmentEntry(anchor="leg-0", length_m=20.0)
    on_update(_ctx(time_s=0.2, segment_entered=entry), state, cfg)
    assert repeat_last(state) == "Please start walking."


def test_speech_duration_scales_with_text():
    assert speech_duration("abcde") == pytest.approx(0.30)
    note_time = 10.0
    cfg = wayfinding_guidance()
    state = GuidanceState()
    out = on_update(_ctx(time_s=note_time), state, cfg)
    expected = note_time + 0.06 * len(out[0].text)
    assert state.speaking_until == pytest.approx(expected)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


def test_anchors_never_repeat_across_many_updates():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    seen: list[tuple] = []
    for k in range(50):
        # the landmark joins once the start and turn messages are done
        landmarks = []
        if k >= 2:
            landmarks = [LandmarkAnnouncement("door 4", "right", 1.0,
                                              "door 4 to the right")]
        ctx = _ctx(time_s=float(k), distance_to_next=6.0, next_kind="turn",
                   next_turn_direction="right", junction_token="T",
                   next_anchor="w9", landmarks=landmarks)
        for note in on_update(ctx, state, cfg):
            seen.append(note.anchor)
        _quiet(state)
    assert len(seen) == len(set(seen))
    kinds = {a[0] for a in seen}
    assert kinds == {"start", "approach", "landmark"}


def test_only_turn_ahead_is_time_critical():
    cfg = wayfinding_guidance()
    state = GuidanceState()
    collected = []
    updates = [
        _ctx(time_s=0.0),
        _ctx(time_s=10.0, distance_to_next=5.0, next_kind="turn",
             next_turn_direction="left", junction_token="T", next_anchor="a"),
        _ctx(time_s=20.0, distance_to_next=5.0, next_kind="destination",
             next_anchor="b"),
        _ctx(time_s=30.0, wrong_direction_accum=5.0),
        _ctx(time_s=40.0, landmarks=[LandmarkAnnouncement("bench", "left", 0.5,
                                                          "bench to the left")]),
    ]
    for ctx in updates:
        collected.extend(on_update(ctx, state, cfg))
        _quiet(state)
    flags = {n.kind: n.time_critical for n in collected}
    assert flags == {"start": False, "turn-ahead": True, "destination": False,
                     "wrong-direction": False, "landmark": False}
