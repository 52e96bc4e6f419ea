"""Rule-based geometric verification of the three stretching exercises.

All checks operate on named 2-D landmarks in normalized image coordinates,
where a lower y value is physically higher (top-down image origin).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional, Tuple, Union

Point = Tuple[float, float]

NOSE = "nose"
LEFT_SHOULDER = "left_shoulder"
RIGHT_SHOULDER = "right_shoulder"
LEFT_ELBOW = "left_elbow"
RIGHT_ELBOW = "right_elbow"
LEFT_WRIST = "left_wrist"
RIGHT_WRIST = "right_wrist"
LEFT_HIP = "left_hip"
RIGHT_HIP = "right_hip"
LEFT_ANKLE = "left_ankle"
RIGHT_ANKLE = "right_ankle"

LANDMARK_NAMES = (
    NOSE,
    LEFT_SHOULDER,
    RIGHT_SHOULDER,
    LEFT_ELBOW,
    RIGHT_ELBOW,
    LEFT_WRIST,
    RIGHT_WRIST,
    LEFT_HIP,
    RIGHT_HIP,
    LEFT_ANKLE,
    RIGHT_ANKLE,
)

ARMS_OVERHEAD = "arms-overhead"
TOE_TOUCH = "toe-touch"
LATERAL_LEAN = "lateral-lean"
EXERCISE_RULES = (ARMS_OVERHEAD, TOE_TOUCH, LATERAL_LEAN)

SUCCESS = "success"
CORRECTIVE = "corrective"

LEAN_LEFT = "left"
LEAN_RIGHT = "right"
UPRIGHT = "upright"

# Accumulating 1/30 s steps drifts by ~1e-13 over a few thousand frames, so
# target/tolerance comparisons allow this margin (far below one frame period).
TIMER_EPS = 1e-9


class PoseError(Exception):
    """Base error for pose-rule evaluation."""


class InsufficientLandmarksError(PoseError):
    """A rule's required landmarks are missing from the frame."""


class DegenerateTorsoError(PoseError):
    """Shoulder and hip midpoints share the same height; lean angle undefined."""


class UnknownExerciseError(PoseError):
    """Exercise id is not one of the supported rules."""


@dataclass(frozen=True)
class LandmarkFrame:
    """Named body landmarks for one frame, each point in [0,1] x [0,1]."""

    timestamp: float
    landmarks: Mapping[str, Point]

    def __post_init__(self) -> None:
        for name, (x, y) in self.landmarks.items():
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise ValueError(f"landmark {name!r} outside [0,1]: ({x}, {y})")

    def get(self, name: str) -> Optional[Point]:
        return self.landmarks.get(name)


@dataclass(frozen=True)
class PoseParameters:
    """Thresholds and timing constants for pose verification."""

    wrist_distance_max: float = 0.3
    toe_touch_max: float = 0.4
    lean_angle_deg: float = 15.0
    frame_period: float = 1.0 / 30.0
    hold_target: float = 5.0
    reset_tolerance: float = 40.0

    def __post_init__(self) -> None:
        for field_name in (
            "wrist_distance_max",
            "toe_touch_max",
            "lean_angle_deg",
            "frame_period",
            "hold_target",
            "reset_tolerance",
        ):
            if getattr(self, field_name) <= 0:
                raise ValueError(f"{field_name} must be strictly positive")
        if not (self.frame_period < self.hold_target < self.reset_tolerance):
            raise ValueError("expected frame_period < hold_target < reset_tolerance")


@dataclass(frozen=True)
class HoldState:
    """Single hold timer: seconds held, consecutive-invalid seconds, done flag."""

    held_seconds: float = 0.0
    invalid_seconds: float = 0.0
    completed: bool = False


@dataclass(frozen=True)
class LateralHoldState:
    """Two independent side timers plus a shared invalid-pose counter.

    The side timers only track holding and completion; invalidity (neither a
    left nor a right lean) is counted once at the exercise level.
    """

    left: HoldState = HoldState()
    right: HoldState = HoldState()
    invalid_seconds: float = 0.0

    @property
    def completed(self) -> bool:
        return self.left.completed and self.right.completed


ExerciseHoldState = Union[HoldState, LateralHoldState]

# Validity of one frame for one rule: plain bool for the single-timer rules,
# or the lean side / False for the lateral lean.
FrameValidity = Union[bool, str]


def check_arms_overhead(frame: LandmarkFrame, params: PoseParameters) -> bool:
    """True iff both wrists and elbows sit strictly above the nose and the
    wrists' horizontal distance stays below the configured maximum."""
    nose = frame.get(NOSE)
    lw, rw = frame.get(LEFT_WRIST), frame.get(RIGHT_WRIST)
    le, re_ = frame.get(LEFT_ELBOW), frame.get(RIGHT_ELBOW)
    if nose is None or lw is None or rw is None or le is None or re_ is None:
        return False
    if not (lw[1] < nose[1] and rw[1] < nose[1]):
        return False
    if not (le[1] < nose[1] and re_[1] < nose[1]):
        return False
    return abs(lw[0] - rw[0]) < params.wrist_distance_max


def toe_touch_distance(frame: LandmarkFrame) -> float:
    """Minimum Euclidean distance over all present wrist-ankle pairs."""
    wrists = [p for name in (LEFT_WRIST, RIGHT_WRIST) if (p := frame.get(name)) is not None]
    ankles = [p for name in (LEFT_ANKLE, RIGHT_ANKLE) if (p := frame.get(name)) is not None]
    if not wrists or not ankles:
        raise InsufficientLandmarksError("toe touch needs at least one wrist and one ankle")
    return min(math.hypot(w[0] - a[0], w[1] - a[1]) for w in wrists for a in ankles)


def trunk_lean_angle(frame: LandmarkFrame) -> float:
    """Signed trunk inclination in degrees; positive leans to the right."""
    pts = [frame.get(n) for n in (LEFT_SHOULDER, RIGHT_SHOULDER, LEFT_HIP, RIGHT_HIP)]
    if any(p is None for p in pts):
        raise InsufficientLandmarksError("trunk lean needs both shoulders and both hips")
    ls, rs, lh, rh = pts
    mid_shoulder = ((ls[0] + rs[0]) / 2.0, (ls[1] + rs[1]) / 2.0)
    mid_hip = ((lh[0] + rh[0]) / 2.0, (lh[1] + rh[1]) / 2.0)
    dy = mid_hip[1] - mid_shoulder[1]
    if dy == 0.0:
        raise DegenerateTorsoError("shoulder and hip midpoints at equal height")
    return math.degrees(math.atan((mid_shoulder[0] - mid_hip[0]) / dy))


def classify_lean(angle_deg: float, params: PoseParameters) -> str:
    """Map a signed trunk angle to ``left`` / ``right`` / ``upright``.

    Both boundaries are strict: an angle of exactly +-lean_angle_deg is upright.
    """
    if angle_deg > params.lean_angle_deg:
        return LEAN_RIGHT
    if angle_deg < -params.lean_angle_deg:
        return LEAN_LEFT
    return UPRIGHT


def frame_validity(exercise: str, frame: LandmarkFrame, params: PoseParameters) -> FrameValidity:
    """Evaluate one frame against one rule; missing landmarks count as invalid."""
    if exercise == ARMS_OVERHEAD:
        return check_arms_overhead(frame, params)
    if exercise == TOE_TOUCH:
        try:
            return toe_touch_distance(frame) < params.toe_touch_max
        except InsufficientLandmarksError:
            return False
    if exercise == LATERAL_LEAN:
        try:
            side = classify_lean(trunk_lean_angle(frame), params)
        except PoseError:
            return False
        return False if side == UPRIGHT else side
    raise UnknownExerciseError(f"unknown exercise rule: {exercise!r}")


def update_hold(
    state: HoldState, valid: bool, params: PoseParameters
) -> Tuple[HoldState, Optional[str]]:
    """Advance a single hold timer by one frame.

    Valid frames accumulate held time (capped at the target, success emitted
    once on reaching it) and clear the invalid counter. Invalid frames freeze
    the held time; the first frame pushing the invalid run past the reset
    tolerance zeroes the timer and emits one corrective event.
    """
    if state.completed:
        return state, None
    if valid:
        held = state.held_seconds + params.frame_period
        if held >= params.hold_target - TIMER_EPS:
            return HoldState(params.hold_target, 0.0, True), SUCCESS
        return HoldState(held, 0.0, False), None
    invalid = state.invalid_seconds + params.frame_period
    if state.invalid_seconds <= params.reset_tolerance + TIMER_EPS < invalid:
        return HoldState(0.0, invalid, False), CORRECTIVE
    return HoldState(state.held_seconds, invalid, False), None


def _update_lateral(
    state: LateralHoldState, validity: FrameValidity, params: PoseParameters
) -> Tuple[LateralHoldState, Optional[str]]:
    if state.completed:
        return state, None
    if validity is False or validity == UPRIGHT:
        invalid = state.invalid_seconds + params.frame_period
        if state.invalid_seconds <= params.reset_tolerance + TIMER_EPS < invalid:
            # Completed side timers survive a reset; only unfinished holds zero.
            left = state.left if state.left.completed else HoldState()
            right = state.right if state.right.completed else HoldState()
            return LateralHoldState(left, right, invalid), CORRECTIVE
        return replace(state, invalid_seconds=invalid), None
    side = validity
    timer = state.left if side == LEAN_LEFT else state.right
    new_timer, _ = update_hold(timer, True, params)
    new_state = LateralHoldState(
        left=new_timer if side == LEAN_LEFT else state.left,
        right=new_timer if side == LEAN_RIGHT else state.right,
        invalid_seconds=0.0,
    )
    if new_state.completed and not state.completed:
        return new_state, SUCCESS
    return new_state, None


def advance_hold(
    state: ExerciseHoldState, validity: FrameValidity, params: PoseParameters
) -> Tuple[ExerciseHoldState, Optional[str]]:
    """Apply one frame's validity to the matching hold-state shape."""
    if isinstance(state, LateralHoldState):
        return _update_lateral(state, validity, params)
    return update_hold(state, bool(validity), params)


def new_hold_state(exercise: str) -> ExerciseHoldState:
    if exercise == LATERAL_LEAN:
        return LateralHoldState()
    if exercise in (ARMS_OVERHEAD, TOE_TOUCH):
        return HoldState()
    raise UnknownExerciseError(f"unknown exercise rule: {exercise!r}")


def evaluate_exercise_frame(
    exercise: str,
    frame: LandmarkFrame,
    state: ExerciseHoldState,
    params: PoseParameters,
) -> Tuple[ExerciseHoldState, Optional[str]]:
    """Run the matching validity rule for ``exercise`` and advance its timer."""
    validity = frame_validity(exercise, frame, params)
    return advance_hold(state, validity, params)


def hold_snapshot(state: ExerciseHoldState) -> Dict[str, object]:
    """JSON-friendly view of a hold state for snapshots and event payloads."""
    if isinstance(state, LateralHoldState):
        return {
            "left": {"held_seconds": state.left.held_seconds, "completed": state.left.completed},
            "right": {"held_seconds": state.right.held_seconds, "completed": state.right.completed},
            "invalid_seconds": state.invalid_seconds,
            "completed": state.completed,
        }
    return {
        "held_seconds": state.held_seconds,
        "invalid_seconds": state.invalid_seconds,
        "completed": state.completed,
    }
