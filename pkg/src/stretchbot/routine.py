"""Routine state machine: scripted exercise sequence, command dispatch to the
simulated execution layer, pose-event handling, and adaptation cues.

All transitions are pure functions over immutable state values so sessions
can be replayed and event logs folded back into identical states.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from . import pose
from .context import STATUS_NOT_YET, STATUS_SUCCESS, ContextPackage
from .reasoner import (
    KIND_NEXT_EXERCISE,
    KIND_POINT,
    KIND_SAY,
    KIND_STOP_ROUTINE,
    ActionCommand,
)

logger = logging.getLogger(__name__)

PHASE_GREETING = "greeting"
PHASE_IN_EXERCISE = "in_exercise"
PHASE_AWAITING_CONFIRMATION = "awaiting_confirmation"
PHASE_PAUSED = "paused"
PHASE_STOPPED = "stopped"

EVENT_POINT_STARTED = "point-started"
EVENT_POINT_FINISHED = "point-finished"
EVENT_SPOKE = "spoke"
EVENT_EXERCISE_SUCCESS = "exercise-success"
EVENT_CORRECTIVE_FEEDBACK = "corrective-feedback"
EVENT_ROUTINE_STOPPED = "routine-stopped"

DEFAULT_PAUSE_CUES = ("take a break", "let's pause", "rest for a moment")
DEFAULT_DISCOMFORT_KEYWORDS = ("hurt", "hurts", "pain", "painful", "ache", "aches", "sore")
DEFAULT_FATIGUE_KEYWORDS = ("tired", "exhausted", "worn out", "fatigued")
# Fused emotion labels mapped to the state concepts used for retrieval.
DEFAULT_EMOTION_MENTIONS = {"tired": "Fatigue", "frustrated": "Frustration", "sad": "Sadness"}


class RoutineError(Exception):
    """Base error for routine-engine operations."""


class UnknownRoutinePositionError(RoutineError):
    """Routine position outside the script bounds."""


@dataclass(frozen=True)
class ExercisePrimitive:
    """One scripted step: pose rule, hold duration, and spoken phrasings."""

    name: str
    rule: str
    hold_target: float
    display: str
    corrective_hint: str

    def __post_init__(self) -> None:
        if self.rule not in pose.EXERCISE_RULES:
            raise RoutineError(f"step {self.name!r}: unknown pose rule {self.rule!r}")
        if self.hold_target <= 0:
            raise RoutineError(f"step {self.name!r}: hold_target must be positive")


@dataclass(frozen=True)
class RoutineScript:
    steps: Tuple[ExercisePrimitive, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise RoutineError("routine script must contain at least one step")

    def __len__(self) -> int:
        return len(self.steps)

    def step(self, index: int) -> ExercisePrimitive:
        if not 0 <= index < len(self.steps):
            raise UnknownRoutinePositionError(f"routine position out of range: {index}")
        return self.steps[index]

    def position_labels(self, index: int) -> Tuple[str, Optional[str]]:
        """Display names for the current step and the one after it (if any)."""
        current = self.step(index)
        next_display = self.steps[index + 1].display if index + 1 < len(self.steps) else None
        return current.display, next_display


def load_routine_script(source: Union[str, Path, Sequence[Mapping[str, object]]]) -> RoutineScript:
    """Parse a routine script from a JSON file, JSON text, or parsed list."""
    if isinstance(source, (str, Path)):
        if isinstance(source, Path) or ("\n" not in source and Path(source).exists()):
            raw = json.loads(Path(source).read_text(encoding="utf-8"))
        else:
            raw = json.loads(str(source))
    else:
        raw = source
    if not isinstance(raw, list):
        raise RoutineError("routine script must be a JSON array of steps")
    steps = []
    for i, entry in enumerate(raw):
        try:
            steps.append(
                ExercisePrimitive(
                    name=str(entry["name"]),
                    rule=str(entry["rule"]),
                    hold_target=float(entry.get("hold_target", 5.0)),
                    display=str(entry["display"]),
                    corrective_hint=str(entry.get("corrective_hint", "")),
                )
            )
        except KeyError as exc:
            raise RoutineError(f"routine step {i}: missing field {exc}") from exc
    return RoutineScript(tuple(steps))


@lru_cache(maxsize=1)
def default_routine_script() -> RoutineScript:
    text = resources.files("stretchbot").joinpath("assets/routine.json").read_text("utf-8")
    return load_routine_script(json.loads(text))


@dataclass(frozen=True)
class ExecutionEvent:
    """One simulated execution-layer event."""

    kind: str
    timestamp: float
    data: Mapping[str, object] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "t": self.timestamp, **self.data}


@dataclass(frozen=True)
class SessionState:
    """Routine position, current hold timers, and confirmation phase."""

    script: RoutineScript
    phase: str = PHASE_GREETING
    index: int = 0
    hold: Optional[pose.ExerciseHoldState] = None
    exercise_status: str = STATUS_NOT_YET
    paused_from: Optional[str] = None
    stopped_reason: Optional[str] = None

    @property
    def current_step(self) -> ExercisePrimitive:
        return self.script.step(self.index)

    @property
    def stopped(self) -> bool:
        return self.phase == PHASE_STOPPED


def _start_exercise(state: SessionState, index: int) -> SessionState:
    step = state.script.step(index)
    return replace(
        state,
        phase=PHASE_IN_EXERCISE,
        index=index,
        hold=pose.new_hold_state(step.rule),
        exercise_status=STATUS_NOT_YET,
        paused_from=None,
    )


def _contains_cue(text: str, cues: Sequence[str]) -> bool:
    lowered = text.lower()
    return any(cue.lower() in lowered for cue in cues)


def apply_command(
    state: SessionState,
    command: ActionCommand,
    positions: Mapping[str, Tuple[float, float, float]],
    now: float = 0.0,
    pause_cues: Sequence[str] = DEFAULT_PAUSE_CUES,
) -> Tuple[SessionState, List[ExecutionEvent]]:
    """Execute one verified command against the simulated layer.

    NextExercise past the final step converts to StopRoutine; unknown point
    targets raise because verification already guarantees membership.
    """
    if state.stopped:
        raise RoutineError("session already stopped")
    events: List[ExecutionEvent] = []

    if command.kind == KIND_SAY:
        events.append(ExecutionEvent(EVENT_SPOKE, now, {"text": command.utterance}))
        if _contains_cue(command.utterance, pause_cues) and state.phase != PHASE_PAUSED:
            return replace(state, phase=PHASE_PAUSED, paused_from=state.phase), events
        return state, events

    if command.kind == KIND_NEXT_EXERCISE:
        if state.phase == PHASE_GREETING:
            new_state = _start_exercise(state, 0)
        elif state.index + 1 < len(state.script):
            new_state = _start_exercise(state, state.index + 1)
        else:
            # Routine is over: the advance becomes the final stop.
            events.append(ExecutionEvent(EVENT_SPOKE, now, {"text": command.utterance}))
            events.append(ExecutionEvent(EVENT_ROUTINE_STOPPED, now, {"reason": "routine complete"}))
            return (
                replace(state, phase=PHASE_STOPPED, stopped_reason="routine complete"),
                events,
            )
        events.append(ExecutionEvent(EVENT_SPOKE, now, {"text": command.utterance}))
        return new_state, events

    if command.kind == KIND_POINT:
        target = command.target or ""
        if target not in positions:
            raise RoutineError(
                f"point target {target!r} missing from the position table; "
                "commands must pass verification before execution"
            )
        position = positions[target]
        events.append(
            ExecutionEvent(EVENT_POINT_STARTED, now, {"object": target, "position": list(position)})
        )
        events.append(ExecutionEvent(EVENT_POINT_FINISHED, now, {"object": target}))
        events.append(ExecutionEvent(EVENT_SPOKE, now, {"text": command.utterance}))
        return state, events

    if command.kind == KIND_STOP_ROUTINE:
        events.append(ExecutionEvent(EVENT_SPOKE, now, {"text": command.utterance}))
        events.append(ExecutionEvent(EVENT_ROUTINE_STOPPED, now, {"reason": "requested"}))
        return replace(state, phase=PHASE_STOPPED, stopped_reason="requested"), events

    raise RoutineError(f"unknown command kind: {command.kind!r}")


def on_pose_event(
    state: SessionState, event_kind: str, now: float = 0.0
) -> Tuple[SessionState, List[ExecutionEvent]]:
    """Route a pose success/corrective event into the session state.

    Success flips the exercise status and waits for the user's go-ahead;
    corrective feedback speaks the step's hint without changing phase.
    Events outside an active exercise are ignored with a log entry.
    """
    if state.phase != PHASE_IN_EXERCISE:
        logger.info("ignoring pose event %r in phase %s", event_kind, state.phase)
        return state, []
    step = state.current_step
    if event_kind == pose.SUCCESS:
        events = [
            ExecutionEvent(
                EVENT_EXERCISE_SUCCESS,
                now,
                {
                    "exercise": step.name,
                    "phase": PHASE_AWAITING_CONFIRMATION,
                    "status": STATUS_SUCCESS,
                },
            )
        ]
        new_state = replace(state, phase=PHASE_AWAITING_CONFIRMATION, exercise_status=STATUS_SUCCESS)
        return new_state, events
    if event_kind == pose.CORRECTIVE:
        events = [
            ExecutionEvent(EVENT_CORRECTIVE_FEEDBACK, now, {"exercise": step.name}),
            ExecutionEvent(EVENT_SPOKE, now, {"text": step.corrective_hint, "corrective": True}),
        ]
        return state, events
    raise RoutineError(f"unknown pose event kind: {event_kind!r}")


def resume_if_paused(state: SessionState) -> SessionState:
    """Any user utterance resumes a paused session where it left off."""
    if state.phase != PHASE_PAUSED:
        return state
    return replace(state, phase=state.paused_from or PHASE_GREETING, paused_from=None)


@dataclass(frozen=True)
class Annotations:
    """Declarative adaptation cues: prompt notes plus extra KG mentions."""

    notes: Tuple[str, ...] = ()
    mentions: Tuple[str, ...] = ()


def _word_match(text: str, keywords: Sequence[str]) -> bool:
    lowered = text.lower()
    return any(
        re.search(rf"(?<![a-z]){re.escape(k.lower())}(?![a-z])", lowered) for k in keywords
    )


def adaptation_hooks(
    state: SessionState,
    package: ContextPackage,
    discomfort_keywords: Sequence[str] = DEFAULT_DISCOMFORT_KEYWORDS,
    fatigue_keywords: Sequence[str] = DEFAULT_FATIGUE_KEYWORDS,
    emotion_mentions: Mapping[str, str] = DEFAULT_EMOTION_MENTIONS,
) -> Annotations:
    """Derive context annotations for the prompt; never executes actions.

    The cues only surface facts (fatigue, discomfort, helpful objects in
    view) so the reasoner makes the branching decision itself.
    """
    notes: List[str] = []
    mentions: List[str] = []
    tokens = package.object_tokens()
    label = package.fused_emotion.label if package.fused_emotion is not None else None

    if label == "tired":
        if "WATER" in tokens:
            notes.append("user may be tired; water available")
        else:
            notes.append("user may be tired")
    if label in emotion_mentions:
        mentions.append(emotion_mentions[label])

    if _word_match(package.transcript, discomfort_keywords):
        notes.append("possible discomfort reported")
        mentions.append("Pain")
    if _word_match(package.transcript, fatigue_keywords):
        mentions.append("Fatigue")

    return Annotations(notes=tuple(notes), mentions=tuple(mentions))
