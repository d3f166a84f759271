"""Training orchestration and the live conversational engine.

train_project reads a corpus directory (nlu.md, stories.md,
responses.json, optional config.yml), trains the intent classifier, the
memoization index and the next-action ranker, and bundles them with the
response templates into a TrainedProject that can be archived and
reloaded byte-identically.

Engine holds one TrainedProject plus an optional knowledge graph and
answers messages: parse, run the policy cascade until the turn closes,
render responses, then record the turn into the graph's dialog history.
Per-sender processing is serialized; distinct senders may run
concurrently. Swapping in a new project happens by replacing the Engine
reference as a whole, so trackers deliberately reset on swap.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import archive as archive_module
from . import dialog, kg as kg_module
from .corpus import (
    DEFAULT_CONFIG_YML,
    ProjectConfig,
    RegexPatternDef,
    ResponseTemplate,
    SynonymTable,
    parse_config,
    parse_nlu_markdown,
    parse_responses,
    parse_stories_markdown,
)
from .dialog import ACTION_LISTEN, MemoIndex, PolicyConfig, PolicyDecision, TedModel
from .errors import CorpusError, TrainingError
from .nlu import (
    Hyperparams,
    IntentModel,
    LexicalConfig,
    NluPipeline,
    ParseResult,
    build_gazetteer,
    train_classifier,
)

# Hard bound on actions per turn; stops runaway memoization cycles that
# crafted story sets could otherwise produce.
MAX_ACTIONS_PER_TURN = 10


@dataclass(frozen=True)
class TrainedProject:
    """Everything a serving engine needs, serializable as one payload."""

    intent_model: IntentModel
    gazetteer: dict[str, list[str]]
    synonyms: SynonymTable
    memo: MemoIndex
    ted: Optional[TedModel]
    policy: PolicyConfig
    templates: dict[str, ResponseTemplate]
    language: str
    seed: int

    def pipeline(self) -> NluPipeline:
        return NluPipeline(
            model=self.intent_model,
            patterns=self.intent_model.patterns,
            gazetteer=self.gazetteer,
            synonyms=self.synonyms,
        )

    def to_payload(self) -> dict:
        return {
            "language": self.language,
            "seed": self.seed,
            "intent_model": self.intent_model.to_dict(),
            "gazetteer": self.gazetteer,
            "synonyms": self.synonyms.as_dict(),
            "memo": self.memo.to_dict(),
            "ted": self.ted.to_dict() if self.ted is not None else None,
            "policy": {
                "nlu_threshold": self.policy.nlu_threshold,
                "ted_threshold": self.policy.ted_threshold,
                "max_history": self.policy.max_history,
                "fallback_action": self.policy.fallback_action,
                "default_fallback_text": self.policy.default_fallback_text,
            },
            "templates": {t.action: list(t.variants) for t in self.templates.values()},
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "TrainedProject":
        return cls(
            intent_model=IntentModel.from_dict(payload["intent_model"]),
            gazetteer={k: list(v) for k, v in payload["gazetteer"].items()},
            synonyms=SynonymTable(payload["synonyms"]),
            memo=MemoIndex.from_dict(payload["memo"]),
            ted=TedModel.from_dict(payload["ted"]) if payload["ted"] is not None else None,
            policy=PolicyConfig(**payload["policy"]),
            templates={
                action: ResponseTemplate(action, tuple(variants))
                for action, variants in payload["templates"].items()
            },
            language=payload["language"],
            seed=payload["seed"],
        )

    def fingerprint(self) -> str:
        return archive_module.fingerprint_payload(self.to_payload())


def package_model(project: TrainedProject, path: str | Path) -> str:
    """Archive the project; returns the content fingerprint."""
    return archive_module.write_archive(project.to_payload(), path)


def load_model(path: str | Path) -> TrainedProject:
    payload, _ = archive_module.read_archive(path)
    return TrainedProject.from_payload(payload)


def _read(path: Path) -> str:
    if not path.exists():
        raise CorpusError(f"missing corpus file: {path}")
    return path.read_text("utf-8")


def load_project_config(data_dir: Path, config_path: Optional[Path] = None) -> ProjectConfig:
    """Resolve the effective config: explicit path, else data_dir/config.yml,
    else the built-in default."""
    if config_path is not None:
        return parse_config(_read(Path(config_path)))
    candidate = data_dir / "config.yml"
    if candidate.exists():
        return parse_config(candidate.read_text("utf-8"))
    return parse_config(DEFAULT_CONFIG_YML)


def train_project(
    data_dir: str | Path,
    config: Optional[ProjectConfig] = None,
    config_path: Optional[str | Path] = None,
    seed: int = 42,
) -> TrainedProject:
    """Train every component from a corpus directory.

    The ranker is trained only when the stories use at least 2 distinct
    actions; a smaller corpus still serves, with the ranker stage skipped.
    Every story action must have a response template so replies can always
    be rendered.
    """
    data_dir = Path(data_dir)
    if config is None:
        config = load_project_config(data_dir, Path(config_path) if config_path else None)

    examples, synonyms, patterns = parse_nlu_markdown(_read(data_dir / "nlu.md"))
    stories = parse_stories_markdown(_read(data_dir / "stories.md"))
    templates = parse_responses(_read(data_dir / "responses.json"))

    story_actions = {a for s in stories for step in s.steps for a in step.actions}
    missing = sorted(a for a in story_actions if a != ACTION_LISTEN and a not in templates)
    if missing:
        raise TrainingError(f"story actions without response templates: {', '.join(missing)}")

    policy = PolicyConfig.from_project_config(config)
    if policy.fallback_action not in templates:
        raise TrainingError(
            f"fallback action {policy.fallback_action!r} has no response template"
        )

    ngram_cfg = config.component("char_ngram_featurizer")
    ngram_params = ngram_cfg.params if ngram_cfg else {}
    clf_params = config.pipeline[-1].params
    hyper = Hyperparams(
        learning_rate=clf_params.get("learning_rate", 0.1),
        epochs=clf_params.get("epochs", 300),
        l2=clf_params.get("l2", 1e-4),
        seed=seed,
    )
    intent_model = train_classifier(
        examples,
        patterns=patterns,
        hyperparams=hyper,
        n_min=ngram_params.get("min_ngram", 1),
        n_max=ngram_params.get("max_ngram", 4),
        lexical_config=LexicalConfig(),
    )

    memo = dialog.train_memoization(stories, max_history=policy.max_history)
    ted = None
    if len(story_actions) >= 2:
        ted = dialog.train_ted(stories, seed=seed, max_history=policy.max_history)

    return TrainedProject(
        intent_model=intent_model,
        gazetteer=build_gazetteer(examples),
        synonyms=synonyms,
        memo=memo,
        ted=ted,
        policy=policy,
        templates=templates,
        language=config.language,
        seed=seed,
    )


@dataclass(frozen=True)
class BotReply:
    """One rendered bot message plus the decision that produced it."""

    text: str
    decision: PolicyDecision


class Engine:
    """A loaded project serving conversations."""

    def __init__(
        self,
        project: TrainedProject,
        kg_store: Optional[kg_module.GraphStore] = None,
        seed: Optional[int] = None,
    ):
        self.project = project
        self.kg_store = kg_store
        self.fingerprint = project.fingerprint()
        self._pipeline = project.pipeline()
        self._rng = np.random.default_rng(project.seed if seed is None else seed)
        self._trackers: dict[str, dialog.DialogTracker] = {}
        self._sender_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    @property
    def intent_count(self) -> int:
        return len(self.project.intent_model.labels)

    @property
    def triple_count(self) -> int:
        return len(self.kg_store.triples) if self.kg_store is not None else 0

    def _lock_for(self, sender: str) -> threading.Lock:
        with self._locks_guard:
            return self._sender_locks.setdefault(sender, threading.Lock())

    def tracker(self, sender: str) -> dialog.DialogTracker:
        with self._locks_guard:
            return self._trackers.setdefault(sender, dialog.DialogTracker(sender))

    def parse(self, text: str) -> ParseResult:
        """Pure NLU; touches no tracker."""
        return self._pipeline.parse(text)

    def respond(self, sender: str, message: str) -> list[BotReply]:
        """Handle one user message end to end; always returns >= 1 reply."""
        with self._lock_for(sender):
            parse = self._pipeline.parse(message)
            tracker = self.tracker(sender)
            tracker.add_user(message, parse)
            replies = self._run_turn(tracker, parse)
            if self.kg_store is not None:
                entities = kg_module.link_entities(self.kg_store, message.split())
                kg_module.record_turn(
                    self.kg_store, sender, message, parse.top_intent, entities
                )
            return replies

    def _run_turn(self, tracker: dialog.DialogTracker, parse: ParseResult) -> list[BotReply]:
        replies: list[BotReply] = []
        while len(replies) < MAX_ACTIONS_PER_TURN:
            decision = dialog.decide(
                tracker, parse, self.project.memo, self.project.ted, self.kg_store,
                self.project.policy,
            )
            if decision.action == ACTION_LISTEN:
                break
            text = decision.response_text
            if text is None:
                text = dialog.select_response(decision.action, self.project.templates, self._rng)
            tracker.add_action(decision.action)
            tracker.add_bot(text)
            replies.append(BotReply(text=text, decision=decision))
            if decision.source != dialog.SOURCE_MEMOIZATION:
                break
        if not replies:
            # A turn must answer something, even if the stories end here.
            decision = PolicyDecision(
                action=self.project.policy.fallback_action,
                confidence=0.0,
                source=dialog.SOURCE_DEFAULT,
                response_text=self.project.policy.default_fallback_text,
            )
            tracker.add_action(decision.action)
            tracker.add_bot(decision.response_text)
            replies.append(BotReply(text=decision.response_text, decision=decision))
        return replies

    def respond_to_intent(self, conversation_id: str, intent: str) -> list[str]:
        """Drive one turn from a known intent; used by conversation tests."""
        with self._lock_for(conversation_id):
            parse = ParseResult(ranking=((intent, 1.0),))
            tracker = self.tracker(conversation_id)
            tracker.add_user(f"/{intent}", parse)
            return [reply.decision.action for reply in self._run_turn(tracker, parse)]
