"""Conversation state tracking and next-action selection.

The next action comes from a strict cascade: exact-match memoization
against training stories, then the low-NLU-confidence fallback, then a
learned linear ranker over windowed dialog state, then the knowledge
graph, and finally a default apology. Exactly one stage fires per call
and no later stage is evaluated after a hit.

A turn's dialog state is the sequence of (user intent, actions so far)
pairs for the last max_history turns, the current partial turn included.
The pseudo-action "action_listen" closes every turn in training targets
but never appears inside state encodings.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kg as kg_module
from . import softmax as _softmax
from .corpus import ComponentConfig, ProjectConfig, ResponseTemplate, Story
from .errors import ConfigError, TrainingError, UnknownActionError
from .nlu import ParseResult

ACTION_LISTEN = "action_listen"

SOURCE_MEMOIZATION = "memoization"
SOURCE_FALLBACK = "fallback"
SOURCE_TED = "ted"
SOURCE_KG = "knowledge_graph"
SOURCE_DEFAULT = "default_fallback"
SOURCES = (SOURCE_MEMOIZATION, SOURCE_FALLBACK, SOURCE_TED, SOURCE_KG, SOURCE_DEFAULT)

KG_ANSWER_ACTION = "action_kg_answer"

# One dialog turn as (user intent, actions executed so far in the turn).
Turn = tuple[str, tuple[str, ...]]
StateKey = tuple[Turn, ...]


@dataclass(frozen=True)
class UserUttered:
    utterance: str
    parse: ParseResult
    timestamp: float

    def __post_init__(self):
        if not self.parse.ranking:
            raise ValueError("user event carries an empty intent ranking")


@dataclass(frozen=True)
class BotUttered:
    text: str
    timestamp: float


@dataclass(frozen=True)
class ActionExecuted:
    name: str
    timestamp: float


Event = UserUttered | BotUttered | ActionExecuted


class DialogTracker:
    """Append-only event log for one conversation."""

    def __init__(self, conversation_id: str):
        self.conversation_id = conversation_id
        self._events: list[Event] = []

    @property
    def events(self) -> tuple[Event, ...]:
        return tuple(self._events)

    def add_user(self, utterance: str, parse: ParseResult) -> None:
        self._events.append(UserUttered(utterance, parse, time.time()))

    def add_action(self, name: str) -> None:
        if not any(isinstance(e, UserUttered) for e in self._events):
            raise ValueError("conversation must start with a user event")
        self._events.append(ActionExecuted(name, time.time()))

    def add_bot(self, text: str) -> None:
        if not any(isinstance(e, UserUttered) for e in self._events):
            raise ValueError("conversation must start with a user event")
        self._events.append(BotUttered(text, time.time()))

    def latest_parse(self) -> Optional[ParseResult]:
        for event in reversed(self._events):
            if isinstance(event, UserUttered):
                return event.parse
        return None

    def latest_utterance(self) -> Optional[str]:
        for event in reversed(self._events):
            if isinstance(event, UserUttered):
                return event.utterance
        return None

    def turns(self) -> list[Turn]:
        """Dialog turns in order; the last one may still be in progress.

        ACTION_LISTEN is a control signal, not state, so it is dropped if
        it was ever logged.
        """
        out: list[Turn] = []
        intent: str | None = None
        actions: list[str] = []
        for event in self._events:
            if isinstance(event, UserUttered):
                if intent is not None:
                    out.append((intent, tuple(actions)))
                intent = event.parse.top_intent
                actions = []
            elif isinstance(event, ActionExecuted) and event.name != ACTION_LISTEN:
                actions.append(event.name)
        if intent is not None:
            out.append((intent, tuple(actions)))
        return out


def state_key(tracker: DialogTracker, max_history: int) -> Optional[StateKey]:
    """Window the tracker's turns into a hashable state, newest last."""
    turns = tracker.turns()
    if not turns:
        return None
    return tuple(turns[-max_history:])


def _training_states(stories: list[Story], max_history: int):
    """Yield every (state, next action) pair a story set defines.

    Each story step contributes one pair per listed action plus a closing
    ACTION_LISTEN target once the step's actions are exhausted.
    """
    for story in stories:
        completed: list[Turn] = []
        for step in story.steps:
            so_far: list[str] = []
            for target in list(step.actions) + [ACTION_LISTEN]:
                turns = completed + [(step.user_intent, tuple(so_far))]
                yield tuple(turns[-max_history:]), target
                so_far.append(target)
            completed.append((step.user_intent, tuple(step.actions)))


def encode_state_key(key: StateKey) -> str:
    return json.dumps([[intent, list(actions)] for intent, actions in key])


def decode_state_key(text: str) -> StateKey:
    return tuple((intent, tuple(actions)) for intent, actions in json.loads(text))


@dataclass(frozen=True)
class MemoIndex:
    """Exact-match lookup from windowed state to the unique next action.

    States observed with conflicting next actions are absent: ambiguity
    yields abstention, never a guess.
    """

    max_history: int
    mapping: dict[StateKey, str]

    def to_dict(self) -> dict:
        entries = sorted((encode_state_key(k), a) for k, a in self.mapping.items())
        return {"max_history": self.max_history, "entries": [list(e) for e in entries]}

    @classmethod
    def from_dict(cls, data: dict) -> "MemoIndex":
        return cls(
            max_history=data["max_history"],
            mapping={decode_state_key(k): a for k, a in data["entries"]},
        )


def train_memoization(stories: list[Story], max_history: int = 3) -> MemoIndex:
    mapping: dict[StateKey, str] = {}
    conflicted: set[StateKey] = set()
    for key, action in _training_states(stories, max_history):
        if key in conflicted:
            continue
        existing = mapping.get(key)
        if existing is None:
            mapping[key] = action
        elif existing != action:
            del mapping[key]
            conflicted.add(key)
    return MemoIndex(max_history=max_history, mapping=mapping)


@dataclass(frozen=True)
class PolicyDecision:
    """One stage's verdict: the action to run and how sure the stage was."""

    action: str
    confidence: float
    source: str
    response_text: Optional[str] = None
    triple: Optional[kg_module.Triple] = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown policy source {self.source!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")
        if self.source == SOURCE_MEMOIZATION and self.confidence != 1.0:
            raise ValueError("memoization decisions are always confidence 1.0")


def predict_memoization(index: MemoIndex, tracker: DialogTracker) -> Optional[PolicyDecision]:
    key = state_key(tracker, index.max_history)
    if key is None:
        return None
    action = index.mapping.get(key)
    if action is None:
        return None
    return PolicyDecision(action=action, confidence=1.0, source=SOURCE_MEMOIZATION)


@dataclass(frozen=True)
class PolicyConfig:
    """Cascade parameters, usually read from the policies: config section."""

    nlu_threshold: float = 0.4
    ted_threshold: float = 0.35
    max_history: int = 3
    fallback_action: str = "utter_fallback"
    default_fallback_text: str = "Maaf kijiye, mujhe samajh nahi aya. Dobara poochiye."

    def __post_init__(self):
        if not 0.0 < self.nlu_threshold < 1.0:
            raise ConfigError(f"nlu_threshold {self.nlu_threshold} outside (0,1)")
        if not 0.0 < self.ted_threshold < 1.0:
            raise ConfigError(f"ted_threshold {self.ted_threshold} outside (0,1)")
        if self.max_history < 1:
            raise ConfigError(f"max_history must be >= 1, got {self.max_history}")

    @classmethod
    def from_project_config(cls, config: ProjectConfig) -> "PolicyConfig":
        def params(name: str) -> dict:
            entry = config.policy(name)
            return entry.params if entry is not None else {}

        fallback = params("fallback")
        defaults = cls()
        return cls(
            nlu_threshold=fallback.get("nlu_threshold", defaults.nlu_threshold),
            ted_threshold=params("ted").get("ted_threshold", defaults.ted_threshold),
            max_history=params("memoization").get("max_history", defaults.max_history),
            fallback_action=fallback.get("action", defaults.fallback_action),
            default_fallback_text=fallback.get("default_text", defaults.default_fallback_text),
        )


def predict_fallback(parse: ParseResult, config: PolicyConfig) -> Optional[PolicyDecision]:
    """Route to the clarification action when the NLU is unsure.

    Fires only on strict inequality: a top confidence exactly at the
    threshold is still considered confident enough.
    """
    top = parse.top_confidence
    if top < config.nlu_threshold:
        return PolicyDecision(
            action=config.fallback_action, confidence=1.0 - top, source=SOURCE_FALLBACK
        )
    return None


def state_features(key: StateKey) -> dict[str, float]:
    """Bag of namespaced intent/action tokens with recency weighting.

    The windowed state flattens to a sequence (each turn's intent, then its
    actions); an element age steps from the end weighs 1/(age+1), repeated
    elements summing.
    """
    elements: list[str] = []
    for intent, actions in key:
        elements.append(f"intent:{intent}")
        elements.extend(f"action:{name}" for name in actions)
    feats: dict[str, float] = {}
    last = len(elements) - 1
    for pos, name in enumerate(elements):
        feats[name] = feats.get(name, 0.0) + 1.0 / (last - pos + 1)
    return feats


@dataclass(frozen=True)
class TedModel:
    """Linear softmax ranker over windowed dialog-state features.

    Ranks real actions only. Turn closure is the memoization policy's
    job; training a listen class here would just teach the ranker to end
    turns it has never seen, starving the stages below it.
    """

    labels: tuple[str, ...]
    feature_names: tuple[str, ...]
    weights: np.ndarray
    bias: np.ndarray
    max_history: int
    seed: int
    final_loss: float

    def featurize(self, key: StateKey) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.feature_names)}
        x = np.zeros(len(self.feature_names))
        for name, value in state_features(key).items():
            col = index.get(name)
            if col is not None:
                x[col] = value
        return x

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "feature_names": list(self.feature_names),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "max_history": self.max_history,
            "seed": self.seed,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TedModel":
        return cls(
            labels=tuple(data["labels"]),
            feature_names=tuple(data["feature_names"]),
            weights=np.array(data["weights"], dtype=float),
            bias=np.array(data["bias"], dtype=float),
            max_history=data["max_history"],
            seed=data["seed"],
            final_loss=data["final_loss"],
        )


def train_ted(
    stories: list[Story],
    seed: int = 42,
    max_history: int = 3,
    learning_rate: float = 0.1,
    epochs: int = 300,
    l2: float = 1e-4,
) -> TedModel:
    """Fit the next-action ranker on all story prefixes.

    Needs at least 2 distinct story actions. States whose next step is
    the implicit turn-closing ACTION_LISTEN are not training pairs.
    """
    story_actions = {a for s in stories for step in s.steps for a in step.actions}
    if len(story_actions) < 2:
        raise TrainingError("need at least 2 distinct actions to train a ranker")

    pairs = [
        (key, action)
        for key, action in _training_states(stories, max_history)
        if action != ACTION_LISTEN
    ]
    labels = tuple(sorted(story_actions))
    label_index = {name: i for i, name in enumerate(labels)}
    feature_names = tuple(sorted({name for key, _ in pairs for name in state_features(key)}))
    col = {name: i for i, name in enumerate(feature_names)}

    x = np.zeros((len(pairs), len(feature_names)))
    y = np.zeros(len(pairs), dtype=int)
    for row, (key, action) in enumerate(pairs):
        for name, value in state_features(key).items():
            x[row, col[name]] = value
        y[row] = label_index[action]

    result = _softmax.fit(
        x, y, n_classes=len(labels), learning_rate=learning_rate, epochs=epochs, l2=l2, seed=seed
    )
    return TedModel(
        labels=labels,
        feature_names=feature_names,
        weights=result.weights,
        bias=result.bias,
        max_history=max_history,
        seed=seed,
        final_loss=result.final_loss,
    )


def rank_actions(model: TedModel, key: StateKey) -> tuple[tuple[str, float], ...]:
    logits = model.weights @ model.featurize(key) + model.bias
    probs = _softmax.softmax(logits)
    order = sorted(zip(model.labels, probs), key=lambda kv: (-kv[1], kv[0]))
    return tuple((name, float(p)) for name, p in order)


def predict_ted(
    model: TedModel, tracker: DialogTracker, config: PolicyConfig
) -> Optional[PolicyDecision]:
    key = state_key(tracker, model.max_history)
    if key is None:
        raise ValueError("tracker has no user turn to rank actions for")
    action, confidence = rank_actions(model, key)[0]
    if confidence >= config.ted_threshold:
        return PolicyDecision(action=action, confidence=confidence, source=SOURCE_TED)
    return None


def decide(
    tracker: DialogTracker,
    parse: ParseResult,
    memo: Optional[MemoIndex],
    ted_model: Optional[TedModel],
    kg_store: Optional[kg_module.GraphStore],
    config: PolicyConfig,
    counters: Optional[dict[str, int]] = None,
) -> PolicyDecision:
    """Run the cascade for the tracker's current state.

    Stage order is fixed: memoization, fallback, ranker, knowledge graph,
    default. counters, when given, tallies which stages were consulted so
    precedence can be audited from outside.
    """

    def consulted(stage: str):
        if counters is not None:
            counters[stage] = counters.get(stage, 0) + 1

    if memo is not None:
        consulted(SOURCE_MEMOIZATION)
        decision = predict_memoization(memo, tracker)
        if decision is not None:
            return decision

    consulted(SOURCE_FALLBACK)
    decision = predict_fallback(parse, config)
    if decision is not None:
        return decision

    if ted_model is not None:
        consulted(SOURCE_TED)
        decision = predict_ted(ted_model, tracker, config)
        if decision is not None:
            return decision

    if kg_store is not None:
        consulted(SOURCE_KG)
        utterance = tracker.latest_utterance() or ""
        result = kg_module.answer(kg_store, tracker.conversation_id, utterance.split())
        if result is not None:
            return PolicyDecision(
                action=KG_ANSWER_ACTION,
                confidence=1.0,
                source=SOURCE_KG,
                response_text=result.text,
                triple=result.triple,
            )

    consulted(SOURCE_DEFAULT)
    return PolicyDecision(
        action=config.fallback_action,
        confidence=0.0,
        source=SOURCE_DEFAULT,
        response_text=config.default_fallback_text,
    )


def select_response(
    action: str, templates: dict[str, ResponseTemplate], rng: np.random.Generator
) -> str:
    """Pick a variant for the action uniformly with the caller's rng."""
    template = templates.get(action)
    if template is None:
        raise UnknownActionError(f"no response template for action {action!r}")
    variants = template.variants
    if len(variants) == 1:
        return variants[0]
    return variants[int(rng.integers(len(variants)))]
