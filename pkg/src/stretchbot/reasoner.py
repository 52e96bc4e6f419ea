"""Reasoner clients, reply parsing, command extraction, and the verifier.

Replies follow a fixed two-block format (a Reasoning block and a final
Output line). The Output line may start with one of three action prefixes;
anything else is treated as plain speech. The verifier normalizes sloppy
prefixes, repairs formatting, enforces contextual coherence, and softens
harsh phrasing before a command reaches execution.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

from .context import STATUS_SUCCESS, ContextPackage

logger = logging.getLogger(__name__)

PREFIX_NEXT = "NEXT_EXERCISE:"
PREFIX_POINT = "POINT_"
PREFIX_STOP = "STOP_ROUTINE"

KIND_NEXT_EXERCISE = "next_exercise"
KIND_POINT = "point"
KIND_STOP_ROUTINE = "stop_routine"
KIND_SAY = "say"

VERDICT_APPROVED = "approved"
VERDICT_EDITED = "edited"
VERDICT_REWRITTEN = "rewritten"

EDIT_NONE = "none"
EDIT_PREFIX = "prefix-normalization"
EDIT_FORMATTING = "formatting-repair"
EDIT_TONE = "tone-adjustment"
EDIT_SEMANTIC = "semantic-rewrite"

# Ascending severity; a report records the most severe class applied.
EDIT_CLASSES = (EDIT_PREFIX, EDIT_FORMATTING, EDIT_TONE, EDIT_SEMANTIC)

DEFAULT_CONFIRMATION_LEXICON = (
    "yes",
    "yep",
    "ok",
    "okay",
    "sure",
    "ready",
    "let's go",
    "go ahead",
    "let's do it",
)

DEFAULT_TONE_SUBSTITUTIONS = {
    "hurry up": "take your time",
    "that's wrong": "let's adjust that a little",
    "you failed": "we can try that again together",
    "do it now": "whenever you're ready",
    "you're doing it wrong": "let's fine-tune your form",
}

DEFAULT_TIMEOUT_SECONDS = 30.0

_DEFAULT_UTTERANCES = {
    KIND_NEXT_EXERCISE: "Let's move on to the next exercise.",
    KIND_POINT: "Have a look over there.",
    KIND_STOP_ROUTINE: "That's the end of our routine. Well done!",
    KIND_SAY: "I'm here with you. Keep going!",
}


class ReasonerError(Exception):
    """Base error for the reasoner stage."""


class ReplyParseError(ReasonerError):
    """Reply lacks a usable Output marker."""


class MalformedCommandError(ReasonerError):
    """Output line carries a broken action marker (e.g. dangling POINT_)."""


class UnrepairableReplyError(ReasonerError):
    """Verifier could not produce a speakable command from the reply."""


class ReasonerTimeoutError(ReasonerError):
    """Request exceeded the configured timeout."""


class ReasonerNetworkError(ReasonerError):
    """Endpoint unreachable or returned a transport-level failure."""


class EmptyCompletionError(ReasonerError):
    """Endpoint or script produced no reply text."""


@dataclass(frozen=True)
class ReasonerReply:
    """A raw model reply plus its parsed Reasoning/Output blocks."""

    raw_text: str
    reasoning: str = ""
    output: str = ""
    latency: float = 0.0


@dataclass(frozen=True)
class ActionCommand:
    """Parsed reasoner decision: an action kind plus the spoken sentence."""

    kind: str
    utterance: str
    target: Optional[str] = None

    def canonical_output(self) -> str:
        """Render the command back to its canonical Output line."""
        if self.kind == KIND_NEXT_EXERCISE:
            return f"{PREFIX_NEXT} {self.utterance}"
        if self.kind == KIND_POINT:
            return f"{PREFIX_POINT}{self.target} {self.utterance}"
        if self.kind == KIND_STOP_ROUTINE:
            return f"{PREFIX_STOP} {self.utterance}"
        return self.utterance

    def as_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {"kind": self.kind, "utterance": self.utterance}
        if self.target is not None:
            data["target"] = self.target
        return data


@dataclass(frozen=True)
class VerifierReport:
    verdict: str
    edit_class: str
    before: str
    after: str

    def as_dict(self) -> Dict[str, str]:
        return {
            "verdict": self.verdict,
            "edit_class": self.edit_class,
            "before": self.before,
            "after": self.after,
        }


def parse_reply(raw_text: str, latency: float = 0.0) -> ReasonerReply:
    """Extract the last Reasoning block and the last Output text.

    Repeated blocks are tolerated by keeping the final occurrence; a missing
    or empty Output marker makes the reply unusable.
    """
    output_idx = raw_text.rfind("Output:")
    if output_idx < 0:
        raise ReplyParseError("reply has no 'Output:' marker")
    output = raw_text[output_idx + len("Output:"):].strip()
    if not output:
        raise ReplyParseError("'Output:' marker carries no text")
    reasoning = ""
    reasoning_idx = raw_text.rfind("Reasoning:", 0, output_idx)
    if reasoning_idx >= 0:
        reasoning = raw_text[reasoning_idx + len("Reasoning:"):output_idx].strip()
    return ReasonerReply(raw_text=raw_text, reasoning=reasoning, output=output, latency=latency)


_POINT_RE = re.compile(r"^POINT_([A-Z_]*)")
_STOP_RE = re.compile(r"^STOP_ROUTINE(?![A-Z0-9_])")


def extract_command(output: str) -> ActionCommand:
    """Match the leading action prefix; anything unprefixed is plain speech."""
    text = output.strip()
    if not text:
        raise MalformedCommandError("empty output text")
    if text.startswith(PREFIX_NEXT):
        return ActionCommand(KIND_NEXT_EXERCISE, text[len(PREFIX_NEXT):].strip())
    match = _POINT_RE.match(text)
    if match:
        name = match.group(1).rstrip("_")
        if not name:
            raise MalformedCommandError("POINT_ marker with empty object name")
        rest = text[match.end():].strip()
        return ActionCommand(KIND_POINT, rest, target=name)
    if _STOP_RE.match(text):
        return ActionCommand(KIND_STOP_ROUTINE, text[len(PREFIX_STOP):].strip())
    return ActionCommand(KIND_SAY, text)


# --- verifier -------------------------------------------------------------

_NEXT_NORMALIZE_RE = re.compile(r"^\s*next[\s_-]+exercise\s*:\s*", re.IGNORECASE)
# Pointing intent is only assumed for an explicit underscore form (any case)
# or an all-caps "POINT NAME"; prose like "Point your toes" stays speech.
_POINT_UNDERSCORE_RE = re.compile(r"^\s*point_([A-Za-z][A-Za-z_]*)\s*:?\s*", re.IGNORECASE)
_POINT_CAPS_RE = re.compile(r"^\s*POINT[\s-]+([A-Z][A-Z_]*)\s*:?\s*")
_STOP_NORMALIZE_RE = re.compile(r"^\s*stop[\s_-]+routine[\s:,—–-]*", re.IGNORECASE)


def normalize_prefixes(text: str) -> str:
    """Rewrite near-miss action prefixes to their canonical spelling."""
    match = _NEXT_NORMALIZE_RE.match(text)
    if match:
        return f"{PREFIX_NEXT} {text[match.end():].strip()}".strip()
    match = _POINT_UNDERSCORE_RE.match(text) or _POINT_CAPS_RE.match(text)
    if match:
        name = match.group(1).upper().rstrip("_")
        return f"{PREFIX_POINT}{name} {text[match.end():].strip()}".strip()
    match = _STOP_NORMALIZE_RE.match(text)
    if match:
        return f"{PREFIX_STOP} {text[match.end():].strip()}".strip()
    return text


_STRAY_OUTPUT_RE = re.compile(r"^\s*Output:\s*", re.IGNORECASE)


def repair_formatting(text: str) -> str:
    """Strip stray markers: leftover Output labels, markdown wrapping, quotes."""
    repaired = text.strip()
    while True:
        match = _STRAY_OUTPUT_RE.match(repaired)
        if not match:
            break
        repaired = repaired[match.end():].strip()
    # A reply that restates "Output:" mid-text keeps only the final statement.
    idx = repaired.rfind("Output:")
    if idx >= 0:
        repaired = repaired[idx + len("Output:"):].strip()
    for wrapper in ("**", "`", '"'):
        if repaired.startswith(wrapper) and repaired.endswith(wrapper) and len(repaired) > 2 * len(wrapper):
            repaired = repaired[len(wrapper):-len(wrapper)].strip()
    return repaired


def _strip_broken_marker(text: str) -> str:
    """Drop a dangling POINT_ marker so the rest can be spoken as-is."""
    return re.sub(r"^\s*POINT_\s*", "", text).strip()


def contains_confirmation(transcript: str, lexicon: Sequence[str]) -> bool:
    """True when the utterance contains any affirmative phrase as whole words."""
    lowered = transcript.lower()
    for phrase in lexicon:
        if re.search(rf"(?<![a-z]){re.escape(phrase.lower())}(?![a-z])", lowered):
            return True
    return False


def _soften(utterance: str, substitutions: Mapping[str, str]) -> str:
    softened = utterance
    for harsh, soft in substitutions.items():
        softened = re.sub(re.escape(harsh), soft, softened, flags=re.IGNORECASE)
    if softened != utterance and softened:
        softened = softened[0].upper() + softened[1:]
    return softened


def verify(
    draft: Optional[ActionCommand],
    reply: ReasonerReply,
    context: ContextPackage,
    confirmation_lexicon: Sequence[str] = DEFAULT_CONFIRMATION_LEXICON,
    tone_substitutions: Mapping[str, str] = DEFAULT_TONE_SUBSTITUTIONS,
) -> Tuple[ActionCommand, VerifierReport]:
    """Run the safeguard stages in order and report what was edited.

    Stages: (a) prefix normalization, (b) formatting repair, (c) contextual
    coherence (pointing only at detected objects; advancing only after
    success or an explicit confirmation), (d) tone softening. The report's
    edit class is the most severe stage that changed anything.
    """
    before = reply.output.strip()
    applied: List[str] = []
    text = before

    normalized = normalize_prefixes(text)
    if normalized != text:
        applied.append(EDIT_PREFIX)
        text = normalized

    repaired = repair_formatting(text)
    if repaired != text:
        applied.append(EDIT_FORMATTING)
        text = repaired

    try:
        command = extract_command(text)
    except MalformedCommandError:
        stripped = _strip_broken_marker(text)
        if not stripped:
            raise UnrepairableReplyError(f"no speakable content in output: {before!r}")
        applied.append(EDIT_FORMATTING)
        command = ActionCommand(KIND_SAY, stripped)

    if command.kind == KIND_POINT and command.target not in context.object_tokens():
        # Pointing at something not in view: keep the sentence, drop the point.
        utterance = command.utterance or _DEFAULT_UTTERANCES[KIND_SAY]
        command = ActionCommand(KIND_SAY, utterance)
        applied.append(EDIT_SEMANTIC)

    if command.kind == KIND_NEXT_EXERCISE:
        confirmed = contains_confirmation(context.transcript, confirmation_lexicon)
        if context.exercise_status != STATUS_SUCCESS and not confirmed:
            utterance = command.utterance or _DEFAULT_UTTERANCES[KIND_SAY]
            command = ActionCommand(KIND_SAY, utterance)
            applied.append(EDIT_SEMANTIC)

    if not command.utterance:
        command = replace(command, utterance=_DEFAULT_UTTERANCES[command.kind])
        applied.append(EDIT_FORMATTING)

    softened = _soften(command.utterance, tone_substitutions)
    if softened != command.utterance:
        command = replace(command, utterance=softened)
        applied.append(EDIT_TONE)

    after = command.canonical_output()
    if not applied and after != before:
        applied.append(EDIT_FORMATTING)

    if not applied:
        report = VerifierReport(VERDICT_APPROVED, EDIT_NONE, before, after)
    else:
        edit_class = max(applied, key=EDIT_CLASSES.index)
        verdict = VERDICT_REWRITTEN if edit_class == EDIT_SEMANTIC else VERDICT_EDITED
        report = VerifierReport(verdict, edit_class, before, after)
    return command, report


# --- clients ---------------------------------------------------------------


class ReasonerClient(Protocol):
    """Blocking reply source; raising is the failure channel."""

    def request(self, prompt_text: str) -> str:
        ...


@dataclass(frozen=True)
class ScriptedReply:
    """One scripted mock reply: text plus optional delay or failure mode."""

    text: str = ""
    delay: float = 0.0
    error: Optional[str] = None  # "timeout" | "network" | "empty"

    def raise_if_error(self) -> None:
        if self.error == "timeout":
            raise ReasonerTimeoutError("scripted timeout")
        if self.error == "network":
            raise ReasonerNetworkError("scripted network failure")
        if self.error == "empty" or (self.error is None and not self.text.strip()):
            raise EmptyCompletionError("scripted empty completion")
        if self.error is not None:
            raise ReasonerError(f"scripted error: {self.error}")


class MockReasonerClient:
    """Deterministic client consuming scripted replies in order."""

    def __init__(
        self,
        replies: Sequence[ScriptedReply],
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self._replies: List[ScriptedReply] = list(replies)
        self._cursor = 0
        self._sleeper = sleeper

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "MockReasonerClient":
        """Load a JSONL script: one reply object per line."""
        replies = []
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            replies.append(
                ScriptedReply(
                    text=raw.get("text", ""),
                    delay=float(raw.get("delay", 0.0)),
                    error=raw.get("error"),
                )
            )
        return cls(replies)

    @property
    def remaining(self) -> int:
        return len(self._replies) - self._cursor

    def next_scripted(self) -> ScriptedReply:
        """Pop the next scripted reply without sleeping (replay path)."""
        if self._cursor >= len(self._replies):
            raise EmptyCompletionError("mock script exhausted")
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply

    def request(self, prompt_text: str) -> str:
        reply = self.next_scripted()
        if reply.delay > 0:
            self._sleeper(reply.delay)
        reply.raise_if_error()
        return reply.text


class HttpReasonerClient:
    """Client for a chat-completions-style HTTP endpoint.

    The auth token is read from an environment variable at request time and
    never appears in configuration files.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        token_env_var: str = "STRETCHBOT_REASONER_TOKEN",
        timeout: float = DEFAULT_TIMEOUT_SECONDS,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.token_env_var = token_env_var
        self.timeout = timeout

    def request(self, prompt_text: str) -> str:
        import httpx

        headers = {}
        token = os.environ.get(self.token_env_var, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt_text}],
        }
        try:
            response = httpx.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
        except httpx.TimeoutException as exc:
            raise ReasonerTimeoutError(f"reasoner request timed out after {self.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise ReasonerNetworkError(f"reasoner request failed: {exc}") from exc
        data = response.json()
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EmptyCompletionError("reasoner response carried no completion") from exc
        if not (text or "").strip():
            raise EmptyCompletionError("reasoner returned an empty completion")
        return text


def request_decision(
    prompt_text: str,
    client: ReasonerClient,
    timeout: float = DEFAULT_TIMEOUT_SECONDS,
    clock: Callable[[], float] = time.monotonic,
) -> ReasonerReply:
    """Fetch one raw reply, measuring latency against the supplied clock.

    Returns an unparsed reply (``reasoning``/``output`` empty); feed
    ``raw_text`` to :func:`parse_reply`. Failures surface as the structured
    reasoner errors so callers can degrade per cause.
    """
    start = clock()
    try:
        raw = client.request(prompt_text)
    except ReasonerError:
        raise
    except Exception as exc:  # transport-level surprises become network errors
        raise ReasonerNetworkError(str(exc)) from exc
    latency = clock() - start
    if latency > timeout:
        raise ReasonerTimeoutError(f"reply arrived after {latency:.1f}s > timeout {timeout:.1f}s")
    if not raw.strip():
        raise EmptyCompletionError("reasoner returned an empty completion")
    return ReasonerReply(raw_text=raw, latency=latency)
