"""Session engine: one full adaptation cycle per trigger, pose ticking, and
state snapshots.

The engine is intentionally single-threaded: every method must be called
from one logical owner at a time (the replay driver calls it directly, the
live service serializes calls behind a per-session lock). Reasoner requests
are returned to the caller as :class:`PendingRequest` intents so each driver
can schedule completion on its own clock; the engine itself never blocks.
"""

from __future__ import annotations

import hashlib
import logging
import time
from collections import deque
from dataclasses import dataclass, replace
from typing import Deque, List, Mapping, Optional, Protocol, Sequence, Tuple

from . import events as ev
from . import pose, routine
from .affect import ChannelPrediction, FusedEmotion, ReliabilityWeights, fuse_emotions
from .config import SessionConfig, config_digest
from .context import (
    ContextPackage,
    PromptBundle,
    Turn,
    assemble_context,
    render_prompt,
    with_annotations,
)
from .generators import GENERATORS, UnknownGeneratorError
from .knowledge import (
    FallbackClient,
    KnowledgeGraph,
    SOURCE_INTERNAL,
    retrieve_relations,
    serialize_for_prompt,
)
from .reasoner import (
    MalformedCommandError,
    ReplyParseError,
    UnrepairableReplyError,
    extract_command,
    parse_reply,
    verify,
)

logger = logging.getLogger(__name__)

TRIGGER_UTTERANCE = "utterance"
TRIGGER_SUCCESS = "exercise-success"


class Clock(Protocol):
    def now(self) -> float:
        ...


class WallClock:
    """Monotonic wall time relative to session start."""

    def __init__(self) -> None:
        self._start = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._start


class SimClock:
    """Manually advanced clock for deterministic replays."""

    def __init__(self, start: float = 0.0) -> None:
        self._t = start

    def now(self) -> float:
        return self._t

    def advance_to(self, t: float) -> None:
        if t > self._t:
            self._t = t


@dataclass(frozen=True)
class PendingRequest:
    """A reasoner request the driver must resolve via ``on_reasoner_result``."""

    cycle: int
    trigger: str
    prompt: PromptBundle
    context: ContextPackage
    issued_at: float


class SessionEngine:
    """Owns one session's state, event log, and metrics."""

    def __init__(
        self,
        session_id: str,
        config: SessionConfig,
        kg: KnowledgeGraph,
        fallback: Optional[FallbackClient],
        script: Optional[routine.RoutineScript] = None,
        clock: Optional[Clock] = None,
    ):
        self.session_id = session_id
        self.config = config
        self.kg = kg
        self.fallback = fallback
        self.script = script or routine.default_routine_script()
        self.clock: Clock = clock or WallClock()

        self.state = routine.SessionState(script=self.script)
        self.log = ev.EventLog()
        self.metrics = ev.SessionMetrics()
        self.history: List[Turn] = []
        self.object_tokens: List[str] = []
        self.fused: Optional[FusedEmotion] = None
        self.transcript: str = ""
        self.in_flight: Optional[PendingRequest] = None
        self._pending_triggers: Deque[str] = deque()
        self._cycles = 0

        self.log.append(
            ev.SESSION_CREATED,
            {
                "session": session_id,
                "config_digest": config_digest(config),
                "script": [step.name for step in self.script.steps],
            },
            self.clock.now(),
        )

    # -- perception and dialogue inputs ------------------------------------

    def on_utterance(self, text: str) -> Optional[PendingRequest]:
        """Record a user utterance and trigger a decision cycle."""
        if self.state.stopped:
            logger.info("session %s stopped; utterance ignored", self.session_id)
            return None
        now = self.clock.now()
        self.log.append(ev.UTTERANCE, {"speaker": "user", "text": text}, now)
        self.transcript = text
        self.history.append(Turn("user", text))
        self.state = routine.resume_if_paused(self.state)
        return self._request_cycle(TRIGGER_UTTERANCE)

    def on_objects(self, tokens: Sequence[str]) -> None:
        """Replace the detected-object set (catalog tokens)."""
        if self.state.stopped:
            logger.info("session %s stopped; object change ignored", self.session_id)
            return
        unknown = [t for t in tokens if t not in self.config.objects]
        if unknown:
            raise ValueError(f"unknown object tokens: {unknown}")
        self.object_tokens = list(dict.fromkeys(tokens))
        self.log.append(ev.OBJECTS_CHANGED, {"present": list(self.object_tokens)}, self.clock.now())

    def on_emotion(
        self,
        channels: Mapping[str, Mapping[str, float]],
        weights: Optional[Mapping[str, float]] = None,
    ) -> None:
        """Fuse fresh channel predictions; an empty map disables affect."""
        if self.state.stopped:
            logger.info("session %s stopped; emotion change ignored", self.session_id)
            return
        if channels:
            allowed = set(self.config.emotion_labels)
            for channel, scores in channels.items():
                bad = sorted(set(scores) - allowed)
                if bad:
                    raise ValueError(f"channel {channel!r} carries unknown emotion labels: {bad}")
            predictions = [ChannelPrediction(ch, dict(scores)) for ch, scores in channels.items()]
            fusion_weights = ReliabilityWeights(dict(weights)) if weights else self.config.weights
            self.fused = fuse_emotions(
                predictions,
                fusion_weights,
                labels=self.config.emotion_labels,
                normalize_inputs=self.config.normalize_emotion_inputs,
            )
        else:
            self.fused = None
        self.log.append(
            ev.EMOTION_CHANGED,
            {
                "channels": {ch: dict(scores) for ch, scores in channels.items()},
                "weights": dict(weights) if weights else None,
                "fused": self.fused.as_dict() if self.fused else None,
            },
            self.clock.now(),
        )

    def on_segment(self, generator: str, duration: float) -> None:
        """Record the start of a named synthetic landmark segment."""
        if generator not in GENERATORS:
            raise UnknownGeneratorError(f"unknown landmark generator {generator!r}")
        self.log.append(
            ev.SEGMENT_STARTED, {"generator": generator, "duration": duration}, self.clock.now()
        )

    def on_frame(self, frame: pose.LandmarkFrame) -> Optional[PendingRequest]:
        """Evaluate one landmark frame against the active exercise."""
        if self.state.phase != routine.PHASE_IN_EXERCISE or self.state.hold is None:
            logger.debug("frame ignored in phase %s", self.state.phase)
            return None
        now = self.clock.now()
        step = self.state.current_step
        params = replace(self.config.pose, hold_target=step.hold_target)
        validity = pose.frame_validity(step.rule, frame, params)
        hold, pose_event = pose.advance_hold(self.state.hold, validity, params)
        self.state = replace(self.state, hold=hold)
        self.log.append(ev.POSE_TICK, {"v": validity, "held": pose.hold_snapshot(hold)}, now)
        if pose_event is None:
            return None
        new_state, exec_events = routine.on_pose_event(self.state, pose_event, now)
        self.state = new_state
        self._log_execution_events(exec_events)
        if pose_event == pose.SUCCESS:
            self.metrics.exercises_completed += 1
            return self._request_cycle(TRIGGER_SUCCESS)
        self.metrics.corrective_resets += 1
        return None

    # -- decision cycle -----------------------------------------------------

    def _request_cycle(self, trigger: str) -> Optional[PendingRequest]:
        if self.state.stopped:
            return None
        if self.in_flight is not None:
            # One request in flight per session; later triggers wait their turn.
            self._pending_triggers.append(trigger)
            return None
        return self._start_cycle(trigger)

    def _start_cycle(self, trigger: str) -> PendingRequest:
        now = self.clock.now()
        self._cycles += 1
        cycle_id = self._cycles
        self.log.append(ev.CYCLE_STARTED, {"cycle": cycle_id, "trigger": trigger}, now)

        detected = tuple(self.config.detected_object(tok) for tok in self.object_tokens)
        package = assemble_context(
            detected,
            self.fused,
            self.state.exercise_status,
            self.transcript,
            tuple(self.history),
            history_cap=self.config.history_cap,
        )
        annotations = routine.adaptation_hooks(
            self.state,
            package,
            discomfort_keywords=self.config.discomfort_keywords,
            fatigue_keywords=self.config.fatigue_keywords,
        )
        package = with_annotations(package, annotations.notes)
        self.log.append(
            ev.CONTEXT_ASSEMBLED,
            {
                "cycle": cycle_id,
                "objects": list(self.object_tokens),
                "emotion": self.fused.label if self.fused else None,
                "status": package.exercise_status,
                "transcript": package.transcript,
                "history_len": len(package.history),
                "annotations": list(annotations.notes),
            },
            now,
        )

        mentions = [self.config.kg_name(tok) for tok in self.object_tokens]
        mentions.extend(annotations.mentions)
        retrieved = retrieve_relations(
            self.kg,
            mentions,
            self.fallback,
            whitelist=self.config.fallback_relations,
            cap=self.config.fallback_cap,
        )
        internal = sum(1 for r in retrieved if r.source == SOURCE_INTERNAL)
        fallback_count = len(retrieved) - internal
        self.metrics.kg_internal_hits += internal
        self.metrics.kg_fallbacks += fallback_count
        self.log.append(
            ev.KG_RETRIEVED,
            {
                "cycle": cycle_id,
                "results": [r.as_dict() for r in retrieved],
                "internal": internal,
                "fallback": fallback_count,
            },
            now,
        )

        kg_block = serialize_for_prompt(retrieved)
        prompt = render_prompt(package, self.script, self.state.index, kg_block)
        digest = hashlib.sha256(prompt.system_prompt.encode("utf-8")).hexdigest()
        self.log.append(
            ev.PROMPT_RENDERED,
            {
                "cycle": cycle_id,
                "digest": digest,
                "chars": len(prompt.system_prompt),
                "current_exercise": prompt.current_exercise,
                "next_exercise": prompt.next_exercise,
                "text": prompt.system_prompt,
            },
            now,
        )

        pending = PendingRequest(
            cycle=cycle_id, trigger=trigger, prompt=prompt, context=package, issued_at=now
        )
        self.in_flight = pending
        return pending

    def on_reasoner_result(
        self,
        pending: PendingRequest,
        raw_text: Optional[str] = None,
        error: Optional[str] = None,
        latency: float = 0.0,
    ) -> Optional[PendingRequest]:
        """Complete one cycle with a raw reply or a failure cause.

        Returns the next request intent when a queued trigger was waiting.
        """
        if self.in_flight is not pending:
            raise RuntimeError("completion does not match the in-flight request")
        self.in_flight = None
        now = self.clock.now()

        reply = None
        if error is None:
            try:
                reply = parse_reply(raw_text or "", latency)
            except ReplyParseError as exc:
                error = f"parse-error: {exc}"

        if error is not None:
            self.metrics.reasoner_failures += 1
            self.metrics.decision_latencies.append(latency)
            self.log.append(
                ev.REASONER_FAILED,
                {"cycle": pending.cycle, "cause": error, "latency": latency},
                now,
            )
            self._speak_fallback(now)
            return self._drain_queue()

        self.metrics.decision_latencies.append(latency)
        self.log.append(
            ev.REASONER_REPLY,
            {"cycle": pending.cycle, "raw": reply.raw_text, "latency": latency},
            now,
        )

        draft = None
        try:
            draft = extract_command(reply.output)
        except MalformedCommandError:
            draft = None
        try:
            command, report = verify(
                draft,
                reply,
                pending.context,
                confirmation_lexicon=self.config.confirmation_lexicon,
                tone_substitutions=self.config.tone_substitutions,
            )
        except UnrepairableReplyError as exc:
            self.metrics.reasoner_failures += 1
            self.log.append(
                ev.REASONER_FAILED, {"cycle": pending.cycle, "cause": f"unrepairable: {exc}"}, now
            )
            self._speak_fallback(now)
            return self._drain_queue()

        self.metrics.decisions_total += 1
        if report.verdict == "approved":
            self.metrics.decisions_approved += 1
        else:
            self.metrics.verifier_edits[report.edit_class] += 1
        self.log.append(ev.VERIFIER_REPORT, {"cycle": pending.cycle, **report.as_dict()}, now)

        new_state, exec_events = routine.apply_command(
            self.state,
            command,
            self.config.position_table(),
            now=now,
            pause_cues=self.config.pause_cues,
        )
        executed = command.kind
        if new_state.stopped and command.kind == "next_exercise":
            executed = "stop_routine"
        self.log.append(
            ev.COMMAND_APPLIED,
            {
                "cycle": pending.cycle,
                "command": command.as_dict(),
                "executed": executed,
                "phase": new_state.phase,
                "index": new_state.index,
            },
            now,
        )
        self.state = new_state
        self._log_execution_events(exec_events)
        return self._drain_queue()

    def _drain_queue(self) -> Optional[PendingRequest]:
        if self.state.stopped:
            self._pending_triggers.clear()
            return None
        if self._pending_triggers:
            return self._start_cycle(self._pending_triggers.popleft())
        return None

    def _speak_fallback(self, now: float) -> None:
        text = self.config.fallback_utterance
        self.log.append(routine.EVENT_SPOKE, {"text": text, "fallback": True}, now)
        self.history.append(Turn("coach", text))

    def _log_execution_events(self, exec_events: Sequence[routine.ExecutionEvent]) -> None:
        for event in exec_events:
            data = dict(event.data)
            self.log.append(event.kind, data, event.timestamp)
            if event.kind == routine.EVENT_SPOKE:
                self.history.append(Turn("coach", str(data["text"])))

    # -- views ---------------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-ready state view consistent with folding the event log."""
        state = self.state
        step = state.script.steps[state.index]
        return {
            "session": self.session_id,
            "phase": state.phase,
            "exercise": {
                "index": state.index,
                "name": step.name,
                "display": step.display,
                "rule": step.rule,
                "hold_target": step.hold_target,
            },
            "hold": pose.hold_snapshot(state.hold) if state.hold is not None else None,
            "exercise_status": state.exercise_status,
            "stopped_reason": state.stopped_reason,
            "objects": [self.config.detected_object(t).as_dict() for t in self.object_tokens],
            "emotion": self.fused.as_dict() if self.fused else None,
            "transcript": self.transcript,
            "history": [{"speaker": t.speaker, "text": t.text} for t in self.history],
            "in_flight": self.in_flight is not None,
            "seq": len(self.log) - 1,
            "metrics": self.metrics.as_dict(),
        }
