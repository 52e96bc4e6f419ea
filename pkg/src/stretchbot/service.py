"""Session service: HTTP API plus server-sent event stream for live sessions.

Each session is owned by one :class:`LiveSession`, which serializes every
engine call behind a lock, runs reasoner requests on worker threads, and
feeds landmark segments at the pose-loop rate on a ticker thread. Event
stream subscribers always replay the backlog from sequence zero.
"""

from __future__ import annotations

import json
import logging
import random
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import events as ev
from .config import SessionConfig, load_config
from .generators import GENERATORS, UnknownGeneratorError, generate_segment
from .knowledge import (
    FallbackClient,
    FixtureFallbackClient,
    KnowledgeGraph,
    load_default_knowledge_graph,
)
from .reasoner import (
    MockReasonerClient,
    ReasonerClient,
    ReasonerError,
    ScriptedReply,
    request_decision,
)
from .routine import RoutineScript, default_routine_script
from .session import PendingRequest, SessionEngine, WallClock

logger = logging.getLogger(__name__)

SSE_HEARTBEAT_SECONDS = 15.0


class MockReplyModel(BaseModel):
    text: str = ""
    delay: float = Field(default=0.0, ge=0)
    error: Optional[str] = None


class CreateSessionRequest(BaseModel):
    mock_replies: Optional[List[MockReplyModel]] = None


class UtteranceRequest(BaseModel):
    text: str = Field(min_length=1)


class EmotionModel(BaseModel):
    channels: Dict[str, Dict[str, float]]
    weights: Optional[Dict[str, float]] = None


class LandmarkSegmentModel(BaseModel):
    generator: str
    duration: float = Field(gt=0, le=120)


class PerceptionRequest(BaseModel):
    objects: Optional[List[str]] = None
    emotion: Optional[EmotionModel] = None
    landmarks: Optional[LandmarkSegmentModel] = None


@dataclass
class ServiceDefaults:
    """What every new session starts from."""

    config: SessionConfig = field(default_factory=load_config)
    kg: Optional[KnowledgeGraph] = None
    fallback: Optional[FallbackClient] = None
    script: Optional[RoutineScript] = None
    mock_script_path: Optional[str] = None
    client_factory: Optional[object] = None  # Callable[[], ReasonerClient]

    def make_client(self, mock_replies: Optional[List[MockReplyModel]]) -> ReasonerClient:
        if mock_replies is not None:
            return MockReasonerClient(
                [ScriptedReply(m.text, m.delay, m.error) for m in mock_replies]
            )
        if self.mock_script_path:
            return MockReasonerClient.from_file(self.mock_script_path)
        if self.client_factory is not None:
            return self.client_factory()  # type: ignore[operator]
        return MockReasonerClient([])


class LiveSession:
    """One wall-clock session: engine + lock + reasoner and segment threads."""

    def __init__(self, session_id: str, defaults: ServiceDefaults, client: ReasonerClient):
        self.lock = threading.RLock()
        self.client = client
        self.rng = random.Random()
        self._segment_generation = 0
        clock = WallClock()
        self.clock = clock
        self.engine = SessionEngine(
            session_id=session_id,
            config=defaults.config,
            kg=defaults.kg or load_default_knowledge_graph(),
            fallback=defaults.fallback if defaults.fallback is not None else FixtureFallbackClient(),
            script=defaults.script or default_routine_script(),
            clock=clock,
        )

    @property
    def stopped(self) -> bool:
        with self.lock:
            return self.engine.state.stopped

    def post_utterance(self, text: str) -> int:
        with self.lock:
            if self.engine.state.stopped:
                raise SessionStoppedError()
            intent = self.engine.on_utterance(text)
            seq = len(self.engine.log) - 1
        if intent is not None:
            self._dispatch(intent)
        return seq

    def post_objects(self, tokens: List[str]) -> None:
        with self.lock:
            if self.engine.state.stopped:
                raise SessionStoppedError()
            resolved = []
            for raw in tokens:
                info = self.engine.config.resolve_object(raw)
                if info is None:
                    raise ValueError(f"unknown object: {raw!r}")
                resolved.append(info.token)
            self.engine.on_objects(resolved)

    def post_emotion(self, channels: Dict[str, Dict[str, float]], weights: Optional[Dict[str, float]]) -> None:
        with self.lock:
            if self.engine.state.stopped:
                raise SessionStoppedError()
            self.engine.on_emotion(channels, weights)

    def start_segment(self, generator: str, duration: float) -> None:
        with self.lock:
            if self.engine.state.stopped:
                raise SessionStoppedError()
            self.engine.on_segment(generator, duration)
            self._segment_generation += 1
            generation = self._segment_generation
            frame_period = self.engine.config.pose.frame_period
        frames = generate_segment(generator, self.clock.now(), duration, frame_period)
        thread = threading.Thread(
            target=self._run_segment, args=(frames, generation, frame_period), daemon=True
        )
        thread.start()

    def _run_segment(self, frames, generation: int, frame_period: float) -> None:
        for frame in frames:
            time.sleep(frame_period)
            with self.lock:
                # A newer segment or a stop supersedes this one.
                if generation != self._segment_generation or self.engine.state.stopped:
                    return
                intent = self.engine.on_frame(frame)
            if intent is not None:
                self._dispatch(intent)

    def _dispatch(self, intent: PendingRequest) -> None:
        thread = threading.Thread(target=self._run_request, args=(intent,), daemon=True)
        thread.start()

    def _run_request(self, intent: PendingRequest) -> None:
        config = self.engine.config
        injected = config.latency.draw(self.rng)
        started = self.clock.now()
        raw: Optional[str] = None
        error: Optional[str] = None
        try:
            reply = request_decision(
                intent.prompt.system_prompt,
                self.client,
                timeout=config.reasoner_timeout,
            )
            raw = reply.raw_text
        except ReasonerError as exc:
            error = f"{type(exc).__name__}: {exc}"
        if injected > 0:
            time.sleep(injected)
        latency = self.clock.now() - started
        with self.lock:
            next_intent = self.engine.on_reasoner_result(
                intent, raw_text=raw, error=error, latency=latency
            )
        if next_intent is not None:
            self._dispatch(next_intent)

    def snapshot(self) -> dict:
        with self.lock:
            return self.engine.snapshot()

    def metrics(self) -> dict:
        with self.lock:
            return self.engine.metrics.as_dict()


class SessionStoppedError(Exception):
    pass


def create_app(defaults: Optional[ServiceDefaults] = None) -> FastAPI:
    defaults = defaults or ServiceDefaults()
    app = FastAPI(title="stretchbot session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: Dict[str, LiveSession] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> LiveSession:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")
        return session

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: Optional[CreateSessionRequest] = None) -> dict:
        session_id = uuid.uuid4().hex[:12]
        mock_replies = body.mock_replies if body is not None else None
        client = defaults.make_client(mock_replies)
        session = LiveSession(session_id, defaults, client)
        with registry_lock:
            sessions[session_id] = session
        return {"session_id": session_id}

    @app.get("/sessions")
    def list_sessions() -> dict:
        with registry_lock:
            return {"sessions": sorted(sessions)}

    @app.post("/sessions/{session_id}/utterance")
    def post_utterance(session_id: str, body: UtteranceRequest) -> dict:
        session = get_session(session_id)
        try:
            seq = session.post_utterance(body.text)
        except SessionStoppedError:
            raise HTTPException(status_code=409, detail="session is stopped")
        return {"accepted": True, "seq": seq}

    @app.post("/sessions/{session_id}/perception")
    def post_perception(session_id: str, body: PerceptionRequest) -> dict:
        session = get_session(session_id)
        applied = []
        try:
            if body.objects is not None:
                session.post_objects(body.objects)
                applied.append("objects")
            if body.emotion is not None:
                session.post_emotion(body.emotion.channels, body.emotion.weights)
                applied.append("emotion")
            if body.landmarks is not None:
                session.start_segment(body.landmarks.generator, body.landmarks.duration)
                applied.append("landmarks")
        except SessionStoppedError:
            raise HTTPException(status_code=409, detail="session is stopped")
        except (ValueError, UnknownGeneratorError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if not applied:
            raise HTTPException(
                status_code=400, detail="perception body must carry objects, emotion, or landmarks"
            )
        return {"accepted": True, "applied": applied}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str) -> dict:
        return get_session(session_id).snapshot()

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str) -> dict:
        return get_session(session_id).metrics()

    @app.get("/sessions/{session_id}/log", response_class=PlainTextResponse)
    def get_log(session_id: str) -> str:
        session = get_session(session_id)
        return "".join(e.to_line() + "\n" for e in session.engine.log.events)

    @app.get("/sessions/{session_id}/events")
    def get_events(
        session_id: str,
        limit: Optional[int] = None,
        heartbeat: float = SSE_HEARTBEAT_SECONDS,
    ) -> StreamingResponse:
        """Ordered event stream; ``limit`` closes the stream after N events
        (handy for curl and tests), otherwise it stays open."""
        session = get_session(session_id)

        def stream() -> Iterator[str]:
            # Subscribers always start from sequence 0 and receive each
            # event exactly once, in log order.
            seq = 0
            sent = 0
            while True:
                for event in session.engine.log.events_since(seq):
                    yield f"id: {event.seq}\ndata: {event.to_line()}\n\n"
                    seq = event.seq + 1
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
                if not session.engine.log.wait_for_more(seq, timeout=heartbeat):
                    yield ": keep-alive\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def serve(
    defaults: Optional[ServiceDefaults] = None,
    host: str = "127.0.0.1",
    port: int = 8787,
) -> None:
    import uvicorn

    uvicorn.run(create_app(defaults), host=host, port=port, log_level="warning")
