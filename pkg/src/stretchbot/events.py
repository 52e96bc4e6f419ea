"""Append-only session event log: journal records, JSONL round-trip, state
folding, and session metrics.

Every state-changing input and every pipeline-stage artifact is appended as
one ordered record, so the final session state is reconstructable as a left
fold over the log and replays can be compared by digest.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

from . import pose, routine
from .config import SessionConfig
from .reasoner import EDIT_CLASSES, EDIT_NONE, ActionCommand

# Inputs and lifecycle
SESSION_CREATED = "session-created"
UTTERANCE = "utterance"
OBJECTS_CHANGED = "objects-changed"
EMOTION_CHANGED = "emotion-changed"
SEGMENT_STARTED = "segment-started"
POSE_TICK = "pose-tick"

# Decision-cycle stages
CYCLE_STARTED = "cycle-started"
CONTEXT_ASSEMBLED = "context-assembled"
KG_RETRIEVED = "kg-retrieved"
PROMPT_RENDERED = "prompt-rendered"
REASONER_REPLY = "reasoner-reply"
REASONER_FAILED = "reasoner-failed"
VERIFIER_REPORT = "verifier-report"
COMMAND_APPLIED = "command-applied"

EXECUTION_EVENT_KINDS = (
    routine.EVENT_POINT_STARTED,
    routine.EVENT_POINT_FINISHED,
    routine.EVENT_SPOKE,
    routine.EVENT_EXERCISE_SUCCESS,
    routine.EVENT_CORRECTIVE_FEEDBACK,
    routine.EVENT_ROUTINE_STOPPED,
)


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    t: float
    kind: str
    data: Mapping[str, object]

    def to_line(self) -> str:
        record = {"seq": self.seq, "t": self.t, "kind": self.kind, "data": self.data}
        return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_line(cls, line: str) -> "SessionEvent":
        record = json.loads(line)
        return cls(seq=record["seq"], t=record["t"], kind=record["kind"], data=record["data"])


class EventLog:
    """Thread-safe ordered journal with sequence numbers from zero."""

    def __init__(self) -> None:
        self._events: List[SessionEvent] = []
        self._cond = threading.Condition()

    def append(self, kind: str, data: Mapping[str, object], t: float) -> SessionEvent:
        with self._cond:
            event = SessionEvent(seq=len(self._events), t=t, kind=kind, data=dict(data))
            self._events.append(event)
            self._cond.notify_all()
            return event

    def __len__(self) -> int:
        with self._cond:
            return len(self._events)

    @property
    def events(self) -> List[SessionEvent]:
        with self._cond:
            return list(self._events)

    def events_since(self, seq: int) -> List[SessionEvent]:
        with self._cond:
            return list(self._events[seq:])

    def wait_for_more(self, seq: int, timeout: float) -> bool:
        """Block until events beyond ``seq`` exist; False on timeout."""
        with self._cond:
            return self._cond.wait_for(lambda: len(self._events) > seq, timeout=timeout)

    def digest(self) -> str:
        blob = "\n".join(e.to_line() for e in self.events).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def write_jsonl(self, path: Union[str, Path]) -> None:
        Path(path).write_text(
            "".join(e.to_line() + "\n" for e in self.events), encoding="utf-8"
        )


def read_jsonl(path: Union[str, Path]) -> List[SessionEvent]:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            events.append(SessionEvent.from_line(line))
    return events


def log_digest(events: Iterable[SessionEvent]) -> str:
    blob = "\n".join(e.to_line() for e in events).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass
class SessionMetrics:
    """Counters mirroring the observable behavior of one session."""

    kg_internal_hits: int = 0
    kg_fallbacks: int = 0
    verifier_edits: Dict[str, int] = field(
        default_factory=lambda: {cls: 0 for cls in EDIT_CLASSES}
    )
    decision_latencies: List[float] = field(default_factory=list)
    corrective_resets: int = 0
    exercises_completed: int = 0
    decisions_total: int = 0
    decisions_approved: int = 0
    reasoner_failures: int = 0

    def as_dict(self) -> Dict[str, object]:
        return {
            "kg_internal_hits": self.kg_internal_hits,
            "kg_fallbacks": self.kg_fallbacks,
            "verifier_edits": dict(self.verifier_edits),
            "decision_latencies": list(self.decision_latencies),
            "corrective_resets": self.corrective_resets,
            "exercises_completed": self.exercises_completed,
            "decisions_total": self.decisions_total,
            "decisions_approved": self.decisions_approved,
            "reasoner_failures": self.reasoner_failures,
        }


@dataclass
class FoldedState:
    """Session view reconstructed purely from the event log."""

    state: routine.SessionState
    objects: List[str] = field(default_factory=list)
    emotion_label: Optional[str] = None
    transcript: str = ""
    history: List[Dict[str, str]] = field(default_factory=list)
    metrics: SessionMetrics = field(default_factory=SessionMetrics)
    last_seq: int = -1


def _command_from_payload(payload: Mapping[str, object]) -> ActionCommand:
    return ActionCommand(
        kind=str(payload["kind"]),
        utterance=str(payload["utterance"]),
        target=payload.get("target"),  # type: ignore[arg-type]
    )


def fold_events(
    events: Sequence[SessionEvent],
    config: SessionConfig,
    script: Optional[routine.RoutineScript] = None,
) -> FoldedState:
    """Left-fold the journal through the same pure transitions the engine uses."""
    script = script or routine.default_routine_script()
    folded = FoldedState(state=routine.SessionState(script=script))
    metrics = folded.metrics

    for event in events:
        folded.last_seq = event.seq
        kind, data = event.kind, event.data
        state = folded.state

        if kind == UTTERANCE:
            folded.transcript = str(data["text"])
            folded.history.append({"speaker": "user", "text": str(data["text"])})
            folded.state = routine.resume_if_paused(state)
        elif kind == routine.EVENT_SPOKE:
            folded.history.append({"speaker": "coach", "text": str(data["text"])})
        elif kind == OBJECTS_CHANGED:
            folded.objects = [str(t) for t in data["present"]]
        elif kind == EMOTION_CHANGED:
            fused = data.get("fused")
            folded.emotion_label = str(fused["label"]) if fused else None
        elif kind == POSE_TICK:
            if state.phase == routine.PHASE_IN_EXERCISE and state.hold is not None:
                step = state.current_step
                params = replace(config.pose, hold_target=step.hold_target)
                hold, _ = pose.advance_hold(state.hold, _validity_from(data["v"]), params)
                folded.state = replace(state, hold=hold)
        elif kind == routine.EVENT_EXERCISE_SUCCESS:
            folded.state, _ = routine.on_pose_event(state, pose.SUCCESS, event.t)
        elif kind == COMMAND_APPLIED:
            command = _command_from_payload(data["command"])  # type: ignore[arg-type]
            folded.state, _ = routine.apply_command(
                state,
                command,
                config.position_table(),
                now=event.t,
                pause_cues=config.pause_cues,
            )
        _accumulate_metrics(metrics, event)

    return folded


def _validity_from(value: object) -> pose.FrameValidity:
    if isinstance(value, bool):
        return value
    return str(value)


def _accumulate_metrics(metrics: SessionMetrics, event: SessionEvent) -> None:
    kind, data = event.kind, event.data
    if kind == routine.EVENT_EXERCISE_SUCCESS:
        metrics.exercises_completed += 1
    elif kind == routine.EVENT_CORRECTIVE_FEEDBACK:
        metrics.corrective_resets += 1
    elif kind == KG_RETRIEVED:
        metrics.kg_internal_hits += int(data.get("internal", 0))
        metrics.kg_fallbacks += int(data.get("fallback", 0))
    elif kind == REASONER_REPLY:
        metrics.decision_latencies.append(float(data["latency"]))
    elif kind == REASONER_FAILED:
        metrics.reasoner_failures += 1
        if "latency" in data:
            metrics.decision_latencies.append(float(data["latency"]))
    elif kind == VERIFIER_REPORT:
        metrics.decisions_total += 1
        edit_class = str(data["edit_class"])
        if edit_class == EDIT_NONE:
            metrics.decisions_approved += 1
        else:
            metrics.verifier_edits[edit_class] = metrics.verifier_edits.get(edit_class, 0) + 1


def metrics_from_events(events: Sequence[SessionEvent]) -> SessionMetrics:
    """Recompute the counters alone; needs no config (unlike a full fold)."""
    metrics = SessionMetrics()
    for event in events:
        _accumulate_metrics(metrics, event)
    return metrics
