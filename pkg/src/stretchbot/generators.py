"""Named synthetic landmark generators for scenarios and the live service.

Hand-authoring 30 Hz landmark frames is impractical, so scenarios reference
generators by name. Each produces a constant full-body pose chosen to be
valid for exactly one rule (or none, for the slouch), which the pose tests
verify directly against the rules.
"""

from __future__ import annotations

from typing import Callable, Dict, List

from . import pose
from .pose import LandmarkFrame, Point

_BASE_BODY: Dict[str, Point] = {
    pose.NOSE: (0.50, 0.30),
    pose.LEFT_SHOULDER: (0.42, 0.40),
    pose.RIGHT_SHOULDER: (0.58, 0.40),
    pose.LEFT_ELBOW: (0.38, 0.45),
    pose.RIGHT_ELBOW: (0.62, 0.45),
    pose.LEFT_WRIST: (0.36, 0.50),
    pose.RIGHT_WRIST: (0.64, 0.50),
    pose.LEFT_HIP: (0.44, 0.62),
    pose.RIGHT_HIP: (0.56, 0.62),
    pose.LEFT_ANKLE: (0.46, 0.92),
    pose.RIGHT_ANKLE: (0.54, 0.92),
}


def _body(**overrides: Point) -> Dict[str, Point]:
    body = dict(_BASE_BODY)
    for name, point in overrides.items():
        body[name.lower()] = point
    return body


def _arms_overhead() -> Dict[str, Point]:
    return _body(
        left_wrist=(0.45, 0.10),
        right_wrist=(0.55, 0.12),
        left_elbow=(0.40, 0.18),
        right_elbow=(0.60, 0.18),
    )


def _toe_touch() -> Dict[str, Point]:
    return _body(
        nose=(0.50, 0.70),
        left_shoulder=(0.44, 0.64),
        right_shoulder=(0.56, 0.64),
        left_elbow=(0.42, 0.76),
        right_elbow=(0.58, 0.76),
        left_wrist=(0.44, 0.86),
        right_wrist=(0.56, 0.86),
        left_hip=(0.44, 0.50),
        right_hip=(0.56, 0.50),
    )


def _lean_right() -> Dict[str, Point]:
    return _body(
        nose=(0.63, 0.22),
        left_shoulder=(0.55, 0.30),
        right_shoulder=(0.71, 0.30),
        left_elbow=(0.53, 0.42),
        right_elbow=(0.75, 0.42),
        left_wrist=(0.49, 0.50),
        right_wrist=(0.77, 0.50),
    )


def _mirror(body: Dict[str, Point]) -> Dict[str, Point]:
    flipped = {name: (1.0 - x, y) for name, (x, y) in body.items()}
    swapped: Dict[str, Point] = {}
    for name, point in flipped.items():
        if name.startswith("left_"):
            swapped["right_" + name[len("left_"):]] = point
        elif name.startswith("right_"):
            swapped["left_" + name[len("right_"):]] = point
        else:
            swapped[name] = point
    return swapped


def _lean_left() -> Dict[str, Point]:
    return _mirror(_lean_right())


def _slouch() -> Dict[str, Point]:
    return dict(_BASE_BODY)


GENERATORS: Dict[str, Callable[[], Dict[str, Point]]] = {
    "valid-arms-overhead": _arms_overhead,
    "valid-toe-touch": _toe_touch,
    "lean-left": _lean_left,
    "lean-right": _lean_right,
    "invalid-slouch": _slouch,
}


class UnknownGeneratorError(Exception):
    pass


def generate_segment(
    name: str,
    start_time: float,
    duration: float,
    frame_period: float = 1.0 / 30.0,
) -> List[LandmarkFrame]:
    """Frames at the pose-loop rate covering [start_time, start_time + duration)."""
    if name not in GENERATORS:
        raise UnknownGeneratorError(
            f"unknown landmark generator {name!r}; expected one of {sorted(GENERATORS)}"
        )
    body = GENERATORS[name]()
    count = int(round(duration / frame_period))
    return [
        LandmarkFrame(timestamp=start_time + k * frame_period, landmarks=dict(body))
        for k in range(count)
    ]
