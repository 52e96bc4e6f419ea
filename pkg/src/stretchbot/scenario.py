"""Scenario files and the deterministic replay driver.

A scenario is a JSONL file: a header line naming the schema, scenario, and
seed (plus optional config overrides), followed by one timed event per line.
Replays run single-threaded on a simulated clock, so identical inputs yield
byte-identical event logs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from . import events as ev
from .config import SessionConfig, _apply_overrides, load_config
from .generators import GENERATORS, generate_segment
from .knowledge import FallbackClient, FixtureFallbackClient, KnowledgeGraph, load_default_knowledge_graph
from .pose import LandmarkFrame
from .reasoner import ScriptedReply
from .routine import RoutineScript
from .session import PendingRequest, SessionEngine, SimClock

SCENARIO_SCHEMA = "stretchbot-scenario/1"

KIND_UTTERANCE = "utterance"
KIND_OBJECTS = "objects"
KIND_EMOTION = "emotion"
KIND_LANDMARKS = "landmarks"
KIND_MOCK_REPLY = "mock_reply"

_EVENT_KINDS = (KIND_UTTERANCE, KIND_OBJECTS, KIND_EMOTION, KIND_LANDMARKS, KIND_MOCK_REPLY)
_MOCK_ERRORS = ("timeout", "network", "empty")


class ScenarioError(Exception):
    """Scenario file violates the schema; message carries the line number."""


@dataclass(frozen=True)
class ScenarioEvent:
    t: float
    kind: str
    payload: Mapping[str, object]


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    timeline: Tuple[ScenarioEvent, ...]
    config_overrides: Mapping[str, object] = field(default_factory=dict)


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise ScenarioError(f"{where}: {message}")


def _validate_event(raw: Mapping[str, object], where: str, last_t: float) -> ScenarioEvent:
    _require(isinstance(raw, dict), where, "event must be a JSON object")
    _require("t" in raw, where, "event missing 't'")
    _require(isinstance(raw["t"], (int, float)), where, "'t' must be a number")
    t = float(raw["t"])
    _require(t >= last_t, where, f"timestamps must be non-decreasing ({t} < {last_t})")
    kind = raw.get("kind")
    _require(kind in _EVENT_KINDS, where, f"unknown event kind: {kind!r}")
    payload = {k: v for k, v in raw.items() if k not in ("t", "kind")}

    if kind == KIND_UTTERANCE:
        _require(isinstance(payload.get("text"), str) and payload["text"].strip() != "", where,
                 "utterance needs a non-empty 'text'")
    elif kind == KIND_OBJECTS:
        present = payload.get("present")
        _require(isinstance(present, list) and all(isinstance(x, str) for x in present), where,
                 "objects needs 'present': list of tokens")
    elif kind == KIND_EMOTION:
        channels = payload.get("channels")
        _require(isinstance(channels, dict), where, "emotion needs a 'channels' object")
        for channel, scores in channels.items():
            _require(isinstance(scores, dict), where, f"channel {channel!r} scores must be an object")
    elif kind == KIND_LANDMARKS:
        if "generator" in payload:
            _require(payload["generator"] in GENERATORS, where,
                     f"unknown landmark generator {payload.get('generator')!r}")
            duration = payload.get("duration")
            _require(isinstance(duration, (int, float)) and duration > 0, where,
                     "landmarks needs a positive 'duration'")
        else:
            frames = payload.get("frames")
            _require(isinstance(frames, list) and frames, where,
                     "landmarks needs 'generator' or a non-empty 'frames' list")
    elif kind == KIND_MOCK_REPLY:
        error = payload.get("error")
        _require(error is None or error in _MOCK_ERRORS, where,
                 f"mock_reply error must be one of {_MOCK_ERRORS}")
        _require(isinstance(payload.get("text", ""), str), where, "mock_reply 'text' must be a string")
        delay = payload.get("delay", 0.0)
        _require(isinstance(delay, (int, float)) and delay >= 0, where,
                 "mock_reply 'delay' must be a non-negative number")
    return ScenarioEvent(t=t, kind=str(kind), payload=payload)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ScenarioError(f"{source}: scenario file is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:1: invalid JSON: {exc}") from exc
    _require(isinstance(header, dict), f"{source}:1", "header must be a JSON object")
    _require(header.get("schema") == SCENARIO_SCHEMA, f"{source}:1",
             f"unsupported schema {header.get('schema')!r}; expected {SCENARIO_SCHEMA!r}")
    _require(isinstance(header.get("name"), str) and header["name"], f"{source}:1",
             "header needs a non-empty 'name'")
    seed = header.get("seed", 0)
    _require(isinstance(seed, int), f"{source}:1", "'seed' must be an integer")
    overrides = header.get("config", {})
    _require(isinstance(overrides, dict), f"{source}:1", "'config' must be an object")

    timeline: List[ScenarioEvent] = []
    last_t = 0.0
    for line_no, line in enumerate(lines[1:], start=2):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{source}:{line_no}: invalid JSON: {exc}") from exc
        event = _validate_event(raw, f"{source}:{line_no}", last_t)
        last_t = event.t
        timeline.append(event)
    return Scenario(
        name=header["name"], seed=seed, timeline=tuple(timeline), config_overrides=overrides
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), source=str(path))


@dataclass
class _Completion:
    at: float
    request: PendingRequest
    raw: Optional[str]
    error: Optional[str]
    latency: float


@dataclass
class ReplayResult:
    scenario: Scenario
    engine: SessionEngine
    events: List[ev.SessionEvent]
    metrics: ev.SessionMetrics
    digest: str
    snapshot: Dict[str, object]


def _expand_steps(scenario: Scenario, frame_period: float) -> List[Tuple[float, str, object]]:
    """Flatten the timeline: landmark segments become per-frame steps."""
    steps: List[Tuple[float, str, object]] = []
    for event in scenario.timeline:
        if event.kind == KIND_LANDMARKS:
            if "generator" in event.payload:
                name = str(event.payload["generator"])
                duration = float(event.payload["duration"])  # type: ignore[arg-type]
                steps.append((event.t, "segment", {"generator": name, "duration": duration}))
                for frame in generate_segment(name, event.t, duration, frame_period):
                    steps.append((frame.timestamp, "frame", frame))
            else:
                for raw in event.payload["frames"]:  # type: ignore[index]
                    frame = LandmarkFrame(
                        timestamp=float(raw.get("t", event.t)),  # type: ignore[union-attr]
                        landmarks={k: tuple(v) for k, v in raw["landmarks"].items()},  # type: ignore[index]
                    )
                    steps.append((frame.timestamp, "frame", frame))
        else:
            steps.append((event.t, event.kind, event.payload))
    steps.sort(key=lambda s: s[0])  # stable: equal timestamps keep authored order
    return steps


def replay_scenario(
    scenario: Scenario,
    config: Optional[SessionConfig] = None,
    kg: Optional[KnowledgeGraph] = None,
    fallback: Optional[FallbackClient] = None,
    script: Optional[RoutineScript] = None,
) -> ReplayResult:
    """Run one scenario to completion on a simulated clock."""
    config = config or load_config()
    if scenario.config_overrides:
        config = _apply_overrides(config, scenario.config_overrides)
    kg = kg or load_default_knowledge_graph()
    fallback = fallback if fallback is not None else FixtureFallbackClient()

    rng = random.Random(scenario.seed)
    clock = SimClock()
    engine = SessionEngine(
        session_id=scenario.name,
        config=config,
        kg=kg,
        fallback=fallback,
        script=script,
        clock=clock,
    )

    replies: List[ScriptedReply] = []
    pending: Optional[_Completion] = None

    def schedule(request: PendingRequest) -> _Completion:
        injected = config.latency.draw(rng)
        if replies:
            reply = replies.pop(0)
            delay = reply.delay + injected
            if reply.error is not None:
                return _Completion(clock.now() + delay, request, None, reply.error, delay)
            if not reply.text.strip():
                return _Completion(clock.now() + delay, request, None, "empty completion", delay)
            return _Completion(clock.now() + delay, request, reply.text, None, delay)
        return _Completion(
            clock.now() + injected, request, None, "empty completion: mock script exhausted", injected
        )

    def resolve(completion: _Completion) -> Optional[_Completion]:
        clock.advance_to(completion.at)
        intent = engine.on_reasoner_result(
            completion.request,
            raw_text=completion.raw,
            error=completion.error,
            latency=completion.latency,
        )
        return schedule(intent) if intent else None

    steps = _expand_steps(scenario, config.pose.frame_period)
    i = 0
    while i < len(steps) or pending is not None:
        next_t = steps[i][0] if i < len(steps) else float("inf")
        if pending is not None and pending.at <= next_t:
            pending = resolve(pending)
            continue
        t, kind, payload = steps[i]
        i += 1
        clock.advance_to(t)
        if kind == KIND_MOCK_REPLY:
            replies.append(
                ScriptedReply(
                    text=str(payload.get("text", "")),  # type: ignore[union-attr]
                    delay=float(payload.get("delay", 0.0)),  # type: ignore[union-attr]
                    error=payload.get("error"),  # type: ignore[union-attr]
                )
            )
        elif kind == KIND_UTTERANCE:
            intent = engine.on_utterance(str(payload["text"]))  # type: ignore[index]
            if intent is not None:
                pending = schedule(intent)
        elif kind == KIND_OBJECTS:
            engine.on_objects([str(x) for x in payload["present"]])  # type: ignore[index]
        elif kind == KIND_EMOTION:
            engine.on_emotion(
                payload["channels"],  # type: ignore[index]
                payload.get("weights"),  # type: ignore[union-attr]
            )
        elif kind == "segment":
            engine.on_segment(str(payload["generator"]), float(payload["duration"]))  # type: ignore[index]
        elif kind == "frame":
            intent = engine.on_frame(payload)  # type: ignore[arg-type]
            if intent is not None:
                pending = schedule(intent)

    log_events = engine.log.events
    return ReplayResult(
        scenario=scenario,
        engine=engine,
        events=log_events,
        metrics=engine.metrics,
        digest=engine.log.digest(),
        snapshot=engine.snapshot(),
    )


def shipped_scenario_paths() -> Dict[str, Path]:
    """Scenario files bundled with the package, keyed by name."""
    from importlib import resources

    root = resources.files("stretchbot").joinpath("assets/scenarios")
    paths: Dict[str, Path] = {}
    for entry in root.iterdir():
        if entry.name.endswith(".jsonl"):
            paths[entry.name.removesuffix(".jsonl")] = Path(str(entry))
    return dict(sorted(paths.items()))
