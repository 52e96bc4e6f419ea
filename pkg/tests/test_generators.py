"""Generators must be valid for exactly their target rule (slouch for none)."""

import pytest

from stretchbot import pose
from stretchbot.generators import GENERATORS, UnknownGeneratorError, generate_segment
from stretchbot.pose import LandmarkFrame, PoseParameters

PARAMS = PoseParameters()

# generator name -> validity expected per rule
EXPECTATIONS = {
    "valid-arms-overhead": {"arms-overhead": True, "toe-touch": False, "lateral-lean": False},
    "valid-toe-touch": {"arms-overhead": False, "toe-touch": True, "lateral-lean": False},
    "lean-left": {"arms-overhead": False, "toe-touch": False, "lateral-lean": "left"},
    "lean-right": {"arms-overhead": False, "toe-touch": False, "lateral-lean": "right"},
    "invalid-slouch": {"arms-overhead": False, "toe-touch": False, "lateral-lean": False},
}


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_generator_validity_matrix(name):
    frame = LandmarkFrame(0.0, GENERATORS[name]())
    for rule, expected in EXPECTATIONS[name].items():
        assert pose.frame_validity(rule, frame, PARAMS) == expected, (name, rule)


def test_all_landmarks_present_and_in_range():
    for name, generator in GENERATORS.items():
        body = generator()
        assert set(body) == set(pose.LANDMARK_NAMES), name
        LandmarkFrame(0.0, body)  # range-checks in the constructor


def test_segment_timing():
    frames = generate_segment("invalid-slouch", start_time=2.0, duration=1.0)
    assert len(frames) == 30
    assert frames[0].timestamp == 2.0
    assert frames[1].timestamp == pytest.approx(2.0 + 1 / 30)


def test_segment_completes_hold():
    frames = generate_segment("valid-arms-overhead", 0.0, 5.2)
    state = pose.HoldState()
    events = []
    for frame in frames:
        state, event = pose.evaluate_exercise_frame("arms-overhead", frame, state, PARAMS)
        if event:
            events.append(event)
    assert events == [pose.SUCCESS]


def test_unknown_generator():
    with pytest.raises(UnknownGeneratorError):
        generate_segment("cartwheel", 0.0, 1.0)
