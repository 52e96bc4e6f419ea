"""Per-turn context assembly and system-prompt rendering.

The prompt template is a versioned text asset with five slots:
{current_exercise}, {next_exercise}, {context_description}, {history_str},
{formatted_kg}. Rendering is deterministic so identical packages produce
byte-identical prompts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from typing import TYPE_CHECKING, Dict, Optional, Sequence, Tuple

from .affect import FusedEmotion

if TYPE_CHECKING:
    from .routine import RoutineScript

STATUS_SUCCESS = "success"
STATUS_NOT_YET = "not yet"

SPEAKER_USER = "user"
SPEAKER_COACH = "coach"
_SPEAKER_LABELS = {SPEAKER_USER: "User", SPEAKER_COACH: "Coach"}

DEFAULT_HISTORY_CAP = 8
NO_TRANSCRIPT = "(silence)"
NO_HISTORY = "(no prior dialogue)"
ROUTINE_COMPLETE = "none — routine complete"

TEMPLATE_SLOTS = (
    "{current_exercise}",
    "{next_exercise}",
    "{context_description}",
    "{history_str}",
    "{formatted_kg}",
)


class ContextError(Exception):
    """Base error for context assembly and prompt rendering."""


@dataclass(frozen=True)
class DetectedObject:
    """One detected object: command token, natural name, fixed 3-D position."""

    token: str
    display: str
    position: Tuple[float, float, float]

    def as_dict(self) -> Dict[str, object]:
        return {"token": self.token, "display": self.display, "position": list(self.position)}


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str


@dataclass(frozen=True)
class ContextPackage:
    """Snapshot of everything the reasoner sees for one decision."""

    detected_objects: Tuple[DetectedObject, ...]
    fused_emotion: Optional[FusedEmotion]
    exercise_status: str
    transcript: str
    history: Tuple[Turn, ...]
    annotations: Tuple[str, ...] = ()

    def object_tokens(self) -> Tuple[str, ...]:
        return tuple(obj.token for obj in self.detected_objects)


@dataclass(frozen=True)
class PromptBundle:
    system_prompt: str
    current_exercise: str
    next_exercise: str
    kg_block: str


def assemble_context(
    objects: Sequence[DetectedObject],
    fused_emotion: Optional[FusedEmotion],
    exercise_status: str,
    transcript: str,
    history: Sequence[Turn],
    annotations: Sequence[str] = (),
    history_cap: int = DEFAULT_HISTORY_CAP,
) -> ContextPackage:
    """Build the per-turn package, truncating history oldest-first."""
    if exercise_status not in (STATUS_SUCCESS, STATUS_NOT_YET):
        raise ContextError(f"invalid exercise status: {exercise_status!r}")
    kept = tuple(history[-history_cap:]) if history_cap > 0 else ()
    return ContextPackage(
        detected_objects=tuple(objects),
        fused_emotion=fused_emotion,
        exercise_status=exercise_status,
        transcript=transcript,
        history=kept,
        annotations=tuple(annotations),
    )


def with_annotations(package: ContextPackage, annotations: Sequence[str]) -> ContextPackage:
    return replace(package, annotations=tuple(annotations))


def describe_context(package: ContextPackage) -> str:
    """Render the {context_description} block: one line per item, fixed order."""
    if package.detected_objects:
        objects = ", ".join(obj.display for obj in package.detected_objects)
    else:
        objects = "none"
    lines = [f"Detected objects: {objects}"]
    if package.fused_emotion is not None:
        lines.append(f"User emotion: {package.fused_emotion.label}")
    lines.append(f"Exercise status: {package.exercise_status}")
    transcript = package.transcript if package.transcript else NO_TRANSCRIPT
    lines.append(f"User says: {transcript}")
    for note in package.annotations:
        lines.append(f"Note: {note}")
    return "\n".join(lines)


def format_history(history: Sequence[Turn]) -> str:
    """Render the {history_str} block, one labeled line per turn."""
    if not history:
        return NO_HISTORY
    return "\n".join(f"{_SPEAKER_LABELS.get(t.speaker, t.speaker)}: {t.text}" for t in history)


@lru_cache(maxsize=1)
def _template() -> str:
    return resources.files("stretchbot").joinpath("assets/prompt_template.txt").read_text("utf-8")


def render_prompt(
    package: ContextPackage,
    script: "RoutineScript",
    position: int,
    kg_block: str,
) -> PromptBundle:
    """Fill every template slot for the given routine position.

    Raises through the script's position lookup when the position is unknown.
    """
    current, next_name = script.position_labels(position)
    next_exercise = next_name if next_name is not None else ROUTINE_COMPLETE
    rendered = _template()
    substitutions = {
        "{current_exercise}": current,
        "{next_exercise}": next_exercise,
        "{context_description}": describe_context(package),
        "{history_str}": format_history(package.history),
        "{formatted_kg}": kg_block,
    }
    for slot, value in substitutions.items():
        rendered = rendered.replace(slot, value)
    for slot in TEMPLATE_SLOTS:
        if slot in rendered:
            raise ContextError(f"template slot left unexpanded: {slot}")
    return PromptBundle(
        system_prompt=rendered,
        current_exercise=current,
        next_exercise=next_exercise,
        kg_block=kg_block,
    )
