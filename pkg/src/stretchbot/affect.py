"""Late fusion of per-channel emotion predictions into a single label.

Fused scores are reliability-weighted averages of the per-channel
confidences; the reported label is the argmax with lexicographic
tie-breaking so replays stay deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

VOICE = "voice"
FACIAL = "facial"
TEXT = "text"
CHANNELS = (VOICE, FACIAL, TEXT)

DEFAULT_EMOTION_LABELS = ("angry", "frustrated", "happy", "neutral", "sad", "tired")


class FusionError(Exception):
    """Base error for emotion fusion."""


class NoReliableChannelError(FusionError):
    """Every provided channel carries zero reliability weight."""


@dataclass(frozen=True)
class ChannelPrediction:
    """One channel's emotion confidences, each in [0,1]."""

    channel: str
    scores: Mapping[str, float]

    def __post_init__(self) -> None:
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        for label, score in self.scores.items():
            if not (0.0 <= score <= 1.0):
                raise ValueError(f"score for {label!r} outside [0,1]: {score}")


@dataclass(frozen=True)
class ReliabilityWeights:
    """Non-negative per-channel weights; missing channels default to 1."""

    weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for channel, w in self.weights.items():
            if channel not in CHANNELS:
                raise ValueError(f"unknown channel {channel!r}")
            if w < 0:
                raise ValueError(f"weight for {channel!r} must be non-negative: {w}")

    def for_channel(self, channel: str) -> float:
        return self.weights.get(channel, 1.0)


@dataclass(frozen=True)
class FusedEmotion:
    label: str
    scores: Mapping[str, float]

    def as_dict(self) -> Dict[str, object]:
        return {"label": self.label, "scores": dict(self.scores)}


def _normalized(scores: Mapping[str, float], channel: str) -> Dict[str, float]:
    total = math.fsum(scores.values())
    if total <= 0:
        raise FusionError(f"cannot normalize all-zero scores on channel {channel!r}")
    return {label: score / total for label, score in scores.items()}


def _argmax_label(scores: Mapping[str, float]) -> str:
    return min(scores, key=lambda label: (-scores[label], label))


def fuse_emotions(
    predictions: Sequence[ChannelPrediction],
    weights: Optional[ReliabilityWeights] = None,
    labels: Optional[Iterable[str]] = None,
    normalize_inputs: bool = False,
) -> FusedEmotion:
    """Fuse the provided channels into one score map and winning label.

    Channels absent from ``predictions`` are excluded from both sums; a label
    missing from one channel contributes 0 for that channel. With
    ``normalize_inputs`` each channel's scores are rescaled to sum to 1
    before averaging (raw confidences are used by default).
    """
    if not predictions:
        raise FusionError("no channel predictions to fuse")
    seen = set()
    for prediction in predictions:
        if prediction.channel in seen:
            raise ValueError(f"channel {prediction.channel!r} provided more than once")
        seen.add(prediction.channel)

    weights = weights or ReliabilityWeights()
    channel_weights = [weights.for_channel(p.channel) for p in predictions]
    total_weight = math.fsum(channel_weights)
    if total_weight <= 0:
        raise NoReliableChannelError("no reliable channel: all provided weights are zero")

    score_maps = [
        _normalized(p.scores, p.channel) if normalize_inputs else p.scores for p in predictions
    ]
    if labels is None:
        label_list = sorted({label for scores in score_maps for label in scores})
    else:
        label_list = list(labels)
    if not label_list:
        raise FusionError("no emotion labels to score")

    fused = {
        label: math.fsum(w * scores.get(label, 0.0) for w, scores in zip(channel_weights, score_maps))
        / total_weight
        for label in label_list
    }
    return FusedEmotion(label=_argmax_label(fused), scores=fused)


def single_channel_passthrough(prediction: ChannelPrediction) -> FusedEmotion:
    """Degenerate fusion: one channel's scores pass through unchanged."""
    if not prediction.scores:
        raise FusionError("prediction carries no scores")
    scores = dict(prediction.scores)
    return FusedEmotion(label=_argmax_label(scores), scores=scores)
