"""Internal knowledge graph with commonsense fallback retrieval.

The graph is a flat JSON resource: each entry maps an entity name to a type
and a relations dictionary (relation name -> one or more target concepts).
Mentions missing from the graph fall back to an external
commonsense service, restricted to a whitelist of relations.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple, Union
from urllib.parse import quote

from importlib import resources

logger = logging.getLogger(__name__)

DEFAULT_FALLBACK_RELATIONS = ("UsedFor", "CapableOf", "MotivatedByGoal", "HasProperty", "AtLocation")
FALLBACK_TRIPLE_CAP = 5
EMPTY_KG_LINE = "No relevant knowledge retrieved."

SOURCE_INTERNAL = "internal"
SOURCE_FALLBACK = "fallback"


class KnowledgeGraphError(Exception):
    """Base error for knowledge-graph loading and retrieval."""


class MalformedEntryError(KnowledgeGraphError):
    """An entity entry violates the resource schema; message names the entity."""


class DuplicateEntityError(KnowledgeGraphError):
    """Two entries resolve to the same entity name."""


def normalize_mention(text: str) -> str:
    """Key used for entity matching: lowercased with spaces/underscores removed."""
    return re.sub(r"[ _]+", "", text.strip().lower())


@dataclass(frozen=True)
class KgEntity:
    """One graph entity: its type plus ordered relation -> targets map."""

    name: str
    entity_type: str
    relations: Mapping[str, Tuple[str, ...]]

    def triples(self) -> List[Tuple[str, str, str]]:
        return [
            (self.name, relation, target)
            for relation, targets in self.relations.items()
            for target in targets
        ]


class KnowledgeGraph:
    """Immutable entity store with normalized exact-match lookup."""

    def __init__(self, entities: Sequence[KgEntity]):
        self._by_key: Dict[str, KgEntity] = {}
        for entity in entities:
            key = normalize_mention(entity.name)
            if key in self._by_key:
                raise DuplicateEntityError(
                    f"duplicate entity name: {entity.name!r} collides with "
                    f"{self._by_key[key].name!r}"
                )
            self._by_key[key] = entity

    def __len__(self) -> int:
        return len(self._by_key)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._by_key == other._by_key

    @property
    def entity_names(self) -> List[str]:
        return [entity.name for entity in self._by_key.values()]

    def lookup(self, mention: str) -> Optional[KgEntity]:
        """Case-insensitive exact match after trimming and separator removal."""
        return self._by_key.get(normalize_mention(mention))


def _parse_entity(name: str, raw: object) -> KgEntity:
    if not isinstance(raw, dict):
        raise MalformedEntryError(f"entity {name!r}: entry must be an object")
    if "type" not in raw:
        raise MalformedEntryError(f"entity {name!r}: missing 'type' field")
    entity_type = raw["type"]
    if not isinstance(entity_type, str) or not entity_type:
        raise MalformedEntryError(f"entity {name!r}: 'type' must be a non-empty string")
    relations_raw = raw.get("relations")
    if not isinstance(relations_raw, dict):
        raise MalformedEntryError(f"entity {name!r}: missing or non-object 'relations' field")
    relations: Dict[str, Tuple[str, ...]] = {}
    for relation, targets in relations_raw.items():
        if isinstance(targets, str):
            targets = [targets]
        if not isinstance(targets, list) or not targets:
            raise MalformedEntryError(
                f"entity {name!r}: relation {relation!r} must map to a string or list of strings"
            )
        for target in targets:
            if not isinstance(target, str) or not target:
                raise MalformedEntryError(
                    f"entity {name!r}: relation {relation!r} has a non-string or empty target"
                )
        relations[relation] = tuple(targets)
    return KgEntity(name=name, entity_type=entity_type, relations=relations)


def _reject_duplicate_keys(pairs: List[Tuple[str, object]]) -> Dict[str, object]:
    out: Dict[str, object] = {}
    for key, value in pairs:
        if key in out:
            raise DuplicateEntityError(f"duplicate entity name: {key!r}")
        out[key] = value
    return out


def load_knowledge_graph(source: Union[str, Path, Mapping[str, object]]) -> KnowledgeGraph:
    """Parse a graph resource from a mapping, a JSON string, or a file path."""
    if isinstance(source, Mapping):
        data: Mapping[str, object] = source
    else:
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
            text = Path(source).read_text(encoding="utf-8")
        else:
            text = str(source)
        try:
            data = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
        except json.JSONDecodeError as exc:
            raise KnowledgeGraphError(f"graph resource is not valid JSON: {exc}") from exc
    if not isinstance(data, Mapping):
        raise KnowledgeGraphError("graph resource must be a JSON object at the top level")
    return KnowledgeGraph([_parse_entity(name, raw) for name, raw in data.items()])


def load_default_knowledge_graph() -> KnowledgeGraph:
    """Load the graph resource shipped with the package."""
    text = resources.files("stretchbot").joinpath("assets/knowledge_graph.json").read_text("utf-8")
    return load_knowledge_graph(text)


@dataclass(frozen=True)
class RetrievedKnowledge:
    """Relations retrieved for one mention, ready for prompt serialization."""

    entity: str
    source: str
    triples: Tuple[Tuple[str, str, str], ...]

    @property
    def serialized(self) -> Tuple[str, ...]:
        return tuple(f"{e} --{rel}--> {target}" for e, rel, target in self.triples)

    def as_dict(self) -> Dict[str, object]:
        return {
            "entity": self.entity,
            "source": self.source,
            "triples": [list(t) for t in self.triples],
        }


class FallbackClient(Protocol):
    """Commonsense source queried for mentions the internal graph misses."""

    def relations_for(self, term: str) -> List[Tuple[str, str]]:
        """Return (relation, target) pairs for ``term``; may raise on failure."""
        ...


@dataclass
class FixtureFallbackClient:
    """Offline fallback backed by a fixed mapping; records every query."""

    mapping: Mapping[str, Sequence[Tuple[str, str]]] = field(default_factory=dict)
    calls: List[str] = field(default_factory=list)
    fail_with: Optional[Exception] = None

    def relations_for(self, term: str) -> List[Tuple[str, str]]:
        self.calls.append(term)
        if self.fail_with is not None:
            raise self.fail_with
        return [tuple(pair) for pair in self.mapping.get(normalize_mention(term), [])]


class ConceptNetClient:
    """Live client for a ConceptNet-compatible HTTP endpoint.

    Requests are serialized and responses cached on disk keyed by the
    normalized term, so repeated sessions stay cheap and reproducible.
    """

    def __init__(
        self,
        base_url: str = "https://api.conceptnet.io",
        cache_dir: Optional[Union[str, Path]] = None,
        timeout: float = 5.0,
        edge_limit: int = 50,
    ):
        self.base_url = base_url.rstrip("/")
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.timeout = timeout
        self.edge_limit = edge_limit
        self._lock = threading.Lock()

    def _cache_path(self, term: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        key = normalize_mention(term) or "_empty"
        return self.cache_dir / f"{quote(key, safe='')}.json"

    def _fetch(self, term: str) -> dict:
        import httpx

        url = f"{self.base_url}/c/en/{quote(term.strip().lower().replace(' ', '_'))}"
        response = httpx.get(url, params={"limit": self.edge_limit}, timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def relations_for(self, term: str) -> List[Tuple[str, str]]:
        with self._lock:
            cache_path = self._cache_path(term)
            if cache_path is not None and cache_path.exists():
                payload = json.loads(cache_path.read_text(encoding="utf-8"))
            else:
                payload = self._fetch(term)
                if cache_path is not None:
                    cache_path.parent.mkdir(parents=True, exist_ok=True)
                    cache_path.write_text(json.dumps(payload), encoding="utf-8")
        key = normalize_mention(term)
        pairs: List[Tuple[str, str]] = []
        for edge in payload.get("edges", []):
            rel = edge.get("rel", {}).get("label")
            start = edge.get("start", {}).get("label", "")
            end = edge.get("end", {}).get("label", "")
            if not rel or not start or not end:
                continue
            # Keep only forward edges whose subject matches the queried term.
            if normalize_mention(start) == key:
                pairs.append((rel, end))
        return pairs


def retrieve_relations(
    graph: KnowledgeGraph,
    mentions: Sequence[str],
    fallback: Optional[FallbackClient] = None,
    whitelist: Sequence[str] = DEFAULT_FALLBACK_RELATIONS,
    cap: int = FALLBACK_TRIPLE_CAP,
) -> List[RetrievedKnowledge]:
    """Retrieve relations for each distinct mention, in mention order.

    Internal hits never touch the fallback client. Fallback results are
    restricted to whitelisted relations and capped; a fallback failure
    degrades to an empty result with a warning instead of raising.
    """
    results: List[RetrievedKnowledge] = []
    seen = set()
    allowed = set(whitelist)
    for mention in mentions:
        key = normalize_mention(mention)
        if not key or key in seen:
            continue
        seen.add(key)
        entity = graph.lookup(mention)
        if entity is not None:
            results.append(
                RetrievedKnowledge(entity.name, SOURCE_INTERNAL, tuple(entity.triples()))
            )
            continue
        term = mention.strip()
        pairs: List[Tuple[str, str]] = []
        if fallback is not None:
            try:
                pairs = fallback.relations_for(term)
            except Exception as exc:
                logger.warning("fallback lookup failed for %r: %s", term, exc)
                pairs = []
        triples = tuple(
            (term, relation, target) for relation, target in pairs if relation in allowed
        )[:cap]
        results.append(RetrievedKnowledge(term, SOURCE_FALLBACK, triples))
    return results


def serialize_for_prompt(results: Sequence[RetrievedKnowledge]) -> str:
    """One ``entity --relation--> target`` line per triple, internal hits first."""
    lines: List[str] = []
    for wanted in (SOURCE_INTERNAL, SOURCE_FALLBACK):
        for result in results:
            if result.source == wanted:
                lines.extend(result.serialized)
    return "\n".join(lines) if lines else EMPTY_KG_LINE
