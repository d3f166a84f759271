"""Triple-store knowledge graph with dialog-history context.

Facts are subject/predicate/object triples loaded from TSV; surface forms
link query tokens to entity nodes; every user turn can be recorded as a
graph node so an entity-free follow-up question inherits the entities of a
recent turn in the same conversation. Answers verbalize one stored triple
as "<subject> <predicate phrase> <object>" and never invent text.

The fact side of a store is immutable after load, so concurrent readers
need no locks; turn recording is serialized per conversation id.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from .errors import CorpusError

CONTEXT_LOOKBACK = 5


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        if not self.subject or not self.predicate:
            raise CorpusError("triple subject and predicate must be non-empty")


@dataclass(frozen=True)
class EntityNode:
    """Canonical entity id plus its lowercase surface forms (id included)."""

    id: str
    aliases: frozenset[str]

    def __post_init__(self):
        assert all(a == a.lower() for a in self.aliases)
        assert self.id.lower() in self.aliases


@dataclass(frozen=True)
class DialogTurnNode:
    conversation_id: str
    turn_index: int
    utterance: str
    intent: str
    entity_ids: tuple[str, ...]
    timestamp: float


@dataclass(frozen=True)
class KgAnswer:
    """A verbalized answer together with the triple that grounds it."""

    text: str
    triple: Triple


class GraphStore:
    """Triple set, entity alias index, predicate phrases and the turn log."""

    def __init__(
        self,
        triples: set[Triple],
        entities: dict[str, EntityNode],
        predicates: dict[str, str] | None = None,
    ):
        for triple in triples:
            if triple.subject not in entities:
                raise CorpusError(f"triple subject {triple.subject!r} has no entity node")
        self.triples: frozenset[Triple] = frozenset(triples)
        self.entities: dict[str, EntityNode] = dict(entities)
        self.predicates: dict[str, str] = dict(predicates or {})
        self.turn_log: dict[str, list[DialogTurnNode]] = {}
        self._by_subject: dict[str, list[Triple]] = {}
        for triple in sorted(self.triples):
            self._by_subject.setdefault(triple.subject, []).append(triple)
        self._alias_index: dict[tuple[str, ...], str] = {}
        for node in entities.values():
            for alias in node.aliases:
                words = tuple(alias.split())
                if not words:
                    continue
                owner = self._alias_index.setdefault(words, node.id)
                if owner != node.id:
                    raise CorpusError(
                        f"alias {alias!r} claimed by both {owner!r} and {node.id!r}"
                    )
        self._turn_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def predicate_phrase(self, predicate: str) -> str:
        return self.predicates.get(predicate, predicate.replace("_", " "))

    def _lock_for(self, conversation_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._turn_locks.setdefault(conversation_id, threading.Lock())


def _entity_builder():
    aliases: dict[str, set[str]] = {}

    def ensure(entity_id: str):
        aliases.setdefault(entity_id, set()).add(entity_id.lower())

    def add_alias(entity_id: str, surface: str):
        ensure(entity_id)
        aliases[entity_id].add(surface.lower())

    def build() -> dict[str, EntityNode]:
        return {
            eid: EntityNode(eid, frozenset(surfaces)) for eid, surfaces in aliases.items()
        }

    return ensure, add_alias, build


def load_triples(document: str, predicates: dict[str, str] | None = None) -> GraphStore:
    """Parse the TSV fact file into a store.

    Fact lines are `subject<TAB>predicate<TAB>object`; alias lines are
    `@alias<TAB>entity<TAB>surface`. Blank lines are skipped, duplicates
    collapse, and entity nodes are created for every subject, object and
    aliased entity. Malformed lines raise with their line number.
    """
    triples: set[Triple] = set()
    ensure, add_alias, build = _entity_builder()
    for lineno, line in enumerate(document.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if fields[0] == "@alias":
            if len(fields) != 3 or not fields[1].strip() or not fields[2].strip():
                raise CorpusError(
                    f"line {lineno}: alias line must be @alias<TAB>entity<TAB>surface"
                )
            add_alias(fields[1].strip(), fields[2].strip())
            continue
        if len(fields) != 3:
            raise CorpusError(
                f"line {lineno}: expected subject<TAB>predicate<TAB>object, got {len(fields)} fields"
            )
        subject, predicate, obj = (f.strip() for f in fields)
        if not subject or not predicate or not obj:
            raise CorpusError(f"line {lineno}: empty field in triple")
        triples.add(Triple(subject, predicate, obj))
        ensure(subject)
        ensure(obj)
    return GraphStore(triples, build(), predicates)


def load_predicate_phrases(document: str) -> dict[str, str]:
    """Parse the two-column `predicate<TAB>phrase` verbalization map."""
    phrases: dict[str, str] = {}
    for lineno, line in enumerate(document.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
            raise CorpusError(f"line {lineno}: expected predicate<TAB>phrase")
        phrases[fields[0].strip()] = fields[1].strip()
    return phrases


def link_entities(store: GraphStore, tokens: list[str]) -> list[str]:
    """Greedy longest alias match over the token sequence, case-insensitive.

    Multi-token aliases are matched as consecutive token runs; each token is
    consumed at most once. Returns entity ids ordered by first occurrence,
    without repeats.
    """
    lowered = [t.lower() for t in tokens]
    max_width = max((len(w) for w in store._alias_index), default=0)
    found: list[str] = []
    seen: set[str] = set()
    i = 0
    while i < len(lowered):
        matched = False
        for width in range(min(max_width, len(lowered) - i), 0, -1):
            entity = store._alias_index.get(tuple(lowered[i : i + width]))
            if entity is not None:
                if entity not in seen:
                    seen.add(entity)
                    found.append(entity)
                i += width
                matched = True
                break
        if not matched:
            i += 1
    return found


def retrieve(
    store: GraphStore,
    entity_ids: list[str],
    predicate_hint: list[str] | None = None,
    hops: int = 1,
) -> list[Triple]:
    """Collect triples rooted at the entities, optionally one hop further.

    With hops=2, objects of hop-1 triples are expanded once more. If any
    hint token appears among a predicate's verbalization words, results are
    narrowed to hint-matching predicates, falling back to the unfiltered
    set when the narrowing leaves nothing. Order is deterministic:
    hint matches first, then hop 1 before hop 2, then lexicographic.
    """
    if hops not in (1, 2):
        raise ValueError(f"hops must be 1 or 2, got {hops}")
    hop_of: dict[Triple, int] = {}
    frontier: list[str] = []
    for eid in entity_ids:
        for triple in store._by_subject.get(eid, ()):
            if triple not in hop_of:
                hop_of[triple] = 1
                frontier.append(triple.object)
    if hops == 2:
        for eid in frontier:
            for triple in store._by_subject.get(eid, ()):
                hop_of.setdefault(triple, 2)

    hint_words = {t.lower() for t in predicate_hint or ()}
    def matches_hint(triple: Triple) -> bool:
        phrase_words = set(store.predicate_phrase(triple.predicate).lower().split())
        return bool(hint_words & phrase_words)

    candidates = list(hop_of)
    if hint_words:
        narrowed = [t for t in candidates if matches_hint(t)]
        if narrowed:
            candidates = narrowed
    candidates.sort(key=lambda t: (not matches_hint(t), hop_of[t], t))
    return candidates


def record_turn(
    store: GraphStore,
    conversation_id: str,
    utterance: str,
    intent: str,
    entity_ids: list[str],
) -> int:
    """Append a turn node for this conversation; returns its 0-based index."""
    with store._lock_for(conversation_id):
        log = store.turn_log.setdefault(conversation_id, [])
        node = DialogTurnNode(
            conversation_id=conversation_id,
            turn_index=len(log),
            utterance=utterance,
            intent=intent,
            entity_ids=tuple(entity_ids),
            timestamp=time.time(),
        )
        log.append(node)
        return node.turn_index


def context_entities(store: GraphStore, conversation_id: str) -> list[str]:
    """Entities of the most recent turn that linked any, within the last
    CONTEXT_LOOKBACK turns of this conversation only."""
    log = store.turn_log.get(conversation_id, ())
    for node in reversed(log[-CONTEXT_LOOKBACK:]):
        if node.entity_ids:
            return list(node.entity_ids)
    return []


def answer(store: GraphStore, conversation_id: str, tokens: list[str]) -> KgAnswer | None:
    """Answer a tokenized question from the graph, or return None.

    Entities come from the tokens; when none link, the entities of a recent
    turn in this conversation stand in. The highest-priority retrieved
    triple is verbalized as "<subject> <predicate phrase> <object>".
    """
    entities = link_entities(store, tokens)
    if not entities:
        entities = context_entities(store, conversation_id)
    if not entities:
        return None
    triples = retrieve(store, entities, predicate_hint=tokens, hops=2)
    if not triples:
        return None
    top = triples[0]
    text = f"{top.subject} {store.predicate_phrase(top.predicate)} {top.object}"
    return KgAnswer(text=text, triple=top)
