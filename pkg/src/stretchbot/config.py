"""Session configuration: pose thresholds, fusion weights, the fixed object
catalog, verifier lexicons, and latency injection."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

from .affect import DEFAULT_EMOTION_LABELS, ReliabilityWeights
from .context import DEFAULT_HISTORY_CAP, DetectedObject
from .knowledge import DEFAULT_FALLBACK_RELATIONS, FALLBACK_TRIPLE_CAP
from .pose import PoseParameters
from .reasoner import (
    DEFAULT_CONFIRMATION_LEXICON,
    DEFAULT_TIMEOUT_SECONDS,
    DEFAULT_TONE_SUBSTITUTIONS,
)
from .routine import DEFAULT_DISCOMFORT_KEYWORDS, DEFAULT_FATIGUE_KEYWORDS, DEFAULT_PAUSE_CUES


class ConfigError(Exception):
    """Configuration file or override is invalid."""


@dataclass(frozen=True)
class ObjectInfo:
    """Catalog entry: command token, natural name, KG entity, fixed position."""

    token: str
    display: str
    kg_name: str
    position: Tuple[float, float, float]
    aliases: Tuple[str, ...] = ()


# Simulation-only positions in meters, robot base at the origin.
DEFAULT_OBJECT_CATALOG: Dict[str, ObjectInfo] = {
    info.token: info
    for info in (
        ObjectInfo("CHAIR", "chair", "Chair", (1.2, -0.6, 0.0), ("chair",)),
        ObjectInfo("WATER", "water bottle", "WaterBottle", (0.8, 0.4, 0.7), ("water", "water bottle", "bottle")),
        ObjectInfo("MUG", "coffee mug", "CoffeeMug", (0.9, -0.3, 0.7), ("coffee", "mug", "coffee mug")),
        ObjectInfo("BANANA", "banana", "Banana", (0.7, 0.2, 0.7), ("banana",)),
        ObjectInfo("GLASS", "glass", "Glass", (0.85, 0.1, 0.7), ("glass", "glass of water")),
        ObjectInfo("TOWEL", "towel", "Towel", (1.0, 0.5, 0.4), ("towel",)),
    )
}

DEFAULT_FALLBACK_UTTERANCE = (
    "Sorry, I lost my train of thought for a moment. Keep going, you're doing great!"
)

LATENCY_OFF = "off"
LATENCY_FIXED = "fixed"
LATENCY_UNIFORM = "uniform"


@dataclass(frozen=True)
class LatencyInjection:
    """Optional artificial reasoner delay: off, fixed, or seeded uniform."""

    mode: str = LATENCY_OFF
    seconds: float = 0.0
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in (LATENCY_OFF, LATENCY_FIXED, LATENCY_UNIFORM):
            raise ConfigError(f"unknown latency mode: {self.mode!r}")
        if self.mode == LATENCY_UNIFORM and not 0 <= self.low <= self.high:
            raise ConfigError("uniform latency requires 0 <= low <= high")

    def draw(self, rng: random.Random) -> float:
        if self.mode == LATENCY_FIXED:
            return self.seconds
        if self.mode == LATENCY_UNIFORM:
            return rng.uniform(self.low, self.high)
        return 0.0


# Preset mimicking a slow remote reasoner: several seconds per reply.
SLOW_REASONER_PRESET = LatencyInjection(mode=LATENCY_UNIFORM, low=3.0, high=10.0)


def parse_latency_spec(spec: str) -> LatencyInjection:
    """Parse CLI/scenario shorthand: ``off``, ``fixed:5``, ``3-10``, ``slow``."""
    spec = spec.strip().lower()
    if spec in ("", "off", "none"):
        return LatencyInjection()
    if spec == "slow":
        return SLOW_REASONER_PRESET
    if spec.startswith("fixed:"):
        return LatencyInjection(mode=LATENCY_FIXED, seconds=float(spec.split(":", 1)[1]))
    if "-" in spec:
        low, high = spec.split("-", 1)
        return LatencyInjection(mode=LATENCY_UNIFORM, low=float(low), high=float(high))
    return LatencyInjection(mode=LATENCY_FIXED, seconds=float(spec))


@dataclass(frozen=True)
class SessionConfig:
    pose: PoseParameters = PoseParameters()
    weights: ReliabilityWeights = field(default_factory=ReliabilityWeights)
    emotion_labels: Tuple[str, ...] = DEFAULT_EMOTION_LABELS
    normalize_emotion_inputs: bool = False
    history_cap: int = DEFAULT_HISTORY_CAP
    fallback_relations: Tuple[str, ...] = DEFAULT_FALLBACK_RELATIONS
    fallback_cap: int = FALLBACK_TRIPLE_CAP
    reasoner_timeout: float = DEFAULT_TIMEOUT_SECONDS
    confirmation_lexicon: Tuple[str, ...] = DEFAULT_CONFIRMATION_LEXICON
    pause_cues: Tuple[str, ...] = DEFAULT_PAUSE_CUES
    discomfort_keywords: Tuple[str, ...] = DEFAULT_DISCOMFORT_KEYWORDS
    fatigue_keywords: Tuple[str, ...] = DEFAULT_FATIGUE_KEYWORDS
    tone_substitutions: Mapping[str, str] = field(
        default_factory=lambda: dict(DEFAULT_TONE_SUBSTITUTIONS)
    )
    fallback_utterance: str = DEFAULT_FALLBACK_UTTERANCE
    objects: Mapping[str, ObjectInfo] = field(default_factory=lambda: dict(DEFAULT_OBJECT_CATALOG))
    latency: LatencyInjection = LatencyInjection()

    def resolve_object(self, text: str) -> Optional[ObjectInfo]:
        """Find a catalog entry by token, alias, or display name."""
        needle = text.strip().lower()
        upper = text.strip().upper()
        if upper in self.objects:
            return self.objects[upper]
        for info in self.objects.values():
            if needle == info.display.lower() or needle in (a.lower() for a in info.aliases):
                return info
        return None

    def detected_object(self, token: str) -> DetectedObject:
        info = self.objects[token]
        return DetectedObject(token=info.token, display=info.display, position=info.position)

    def position_table(self) -> Dict[str, Tuple[float, float, float]]:
        return {token: info.position for token, info in self.objects.items()}

    def kg_name(self, token: str) -> str:
        return self.objects[token].kg_name


def _apply_overrides(config: SessionConfig, raw: Mapping[str, object]) -> SessionConfig:
    known = {
        "pose",
        "weights",
        "emotion_labels",
        "normalize_emotion_inputs",
        "history_cap",
        "fallback_relations",
        "fallback_cap",
        "reasoner_timeout",
        "confirmation_lexicon",
        "pause_cues",
        "discomfort_keywords",
        "fatigue_keywords",
        "tone_substitutions",
        "fallback_utterance",
        "objects",
        "latency",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")

    kwargs: Dict[str, object] = {}
    if "pose" in raw:
        kwargs["pose"] = PoseParameters(**raw["pose"])  # type: ignore[arg-type]
    if "weights" in raw:
        kwargs["weights"] = ReliabilityWeights(dict(raw["weights"]))  # type: ignore[arg-type]
    if "emotion_labels" in raw:
        kwargs["emotion_labels"] = tuple(raw["emotion_labels"])  # type: ignore[arg-type]
    if "normalize_emotion_inputs" in raw:
        kwargs["normalize_emotion_inputs"] = bool(raw["normalize_emotion_inputs"])
    if "history_cap" in raw:
        kwargs["history_cap"] = int(raw["history_cap"])  # type: ignore[arg-type]
    if "fallback_relations" in raw:
        kwargs["fallback_relations"] = tuple(raw["fallback_relations"])  # type: ignore[arg-type]
    if "fallback_cap" in raw:
        kwargs["fallback_cap"] = int(raw["fallback_cap"])  # type: ignore[arg-type]
    if "reasoner_timeout" in raw:
        kwargs["reasoner_timeout"] = float(raw["reasoner_timeout"])  # type: ignore[arg-type]
    if "confirmation_lexicon" in raw:
        kwargs["confirmation_lexicon"] = tuple(raw["confirmation_lexicon"])  # type: ignore[arg-type]
    if "pause_cues" in raw:
        kwargs["pause_cues"] = tuple(raw["pause_cues"])  # type: ignore[arg-type]
    if "discomfort_keywords" in raw:
        kwargs["discomfort_keywords"] = tuple(raw["discomfort_keywords"])  # type: ignore[arg-type]
    if "fatigue_keywords" in raw:
        kwargs["fatigue_keywords"] = tuple(raw["fatigue_keywords"])  # type: ignore[arg-type]
    if "tone_substitutions" in raw:
        kwargs["tone_substitutions"] = dict(raw["tone_substitutions"])  # type: ignore[arg-type]
    if "fallback_utterance" in raw:
        kwargs["fallback_utterance"] = str(raw["fallback_utterance"])
    if "objects" in raw:
        catalog: Dict[str, ObjectInfo] = {}
        for token, entry in raw["objects"].items():  # type: ignore[union-attr]
            catalog[token] = ObjectInfo(
                token=token,
                display=str(entry["display"]),
                kg_name=str(entry.get("kg_name", entry["display"])),
                position=tuple(entry.get("position", (0.0, 0.0, 0.0))),  # type: ignore[arg-type]
                aliases=tuple(entry.get("aliases", ())),  # type: ignore[arg-type]
            )
        kwargs["objects"] = catalog
    if "latency" in raw:
        entry = raw["latency"]
        if isinstance(entry, str):
            kwargs["latency"] = parse_latency_spec(entry)
        else:
            kwargs["latency"] = LatencyInjection(
                mode=str(entry.get("mode", LATENCY_OFF)),  # type: ignore[union-attr]
                seconds=float(entry.get("seconds", 0.0)),  # type: ignore[union-attr]
                low=float(entry.get("low", 0.0)),  # type: ignore[union-attr]
                high=float(entry.get("high", 0.0)),  # type: ignore[union-attr]
            )
    return replace(config, **kwargs)  # type: ignore[arg-type]


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, object]] = None,
) -> SessionConfig:
    """Defaults, optionally overlaid with a JSON file and then a mapping."""
    config = SessionConfig()
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a JSON object")
        config = _apply_overrides(config, raw)
    if overrides:
        config = _apply_overrides(config, overrides)
    return config


def config_digest(config: SessionConfig) -> str:
    """Stable digest of the fields that influence replay behavior."""
    payload = {
        "pose": vars(config.pose),
        "weights": dict(config.weights.weights),
        "emotion_labels": list(config.emotion_labels),
        "normalize_emotion_inputs": config.normalize_emotion_inputs,
        "history_cap": config.history_cap,
        "fallback_relations": list(config.fallback_relations),
        "fallback_cap": config.fallback_cap,
        "reasoner_timeout": config.reasoner_timeout,
        "confirmation_lexicon": list(config.confirmation_lexicon),
        "pause_cues": list(config.pause_cues),
        "discomfort_keywords": list(config.discomfort_keywords),
        "fatigue_keywords": list(config.fatigue_keywords),
        "tone_substitutions": dict(config.tone_substitutions),
        "fallback_utterance": config.fallback_utterance,
        "objects": {
            token: {
                "display": info.display,
                "kg_name": info.kg_name,
                "position": list(info.position),
                "aliases": list(info.aliases),
            }
            for token, info in config.objects.items()
        },
        "latency": vars(config.latency),
    }
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
