"""Training-corpus artifacts and their file formats.

Five files make up a project corpus: ``nlu.md`` (intent examples, synonym
groups, regex patterns), ``stories.md`` (training conversations),
``conversationtest.md`` (same grammar as stories, actions read as expected
bot behavior), ``config.yml`` (pipeline and policy settings) and
``responses.json`` (action name to response variants).

The markdown grammar, spelled out:

    ## intent:<name>        one section per intent, <name> in [a-z0-9_]+
    - <example text>        one training example; [value](entity) annotates a span
    ## synonym:<canonical>  surface forms below map to <canonical>
    - <surface form>
    ## regex:<entity>       one regular expression per bullet
    - <pattern>

and for stories:

    ## <story name>
    * <intent>              opens a step
      - <action>            indented; attaches to the current step in order

Parsers raise :class:`~baatcheet.errors.CorpusError` with a line number on
any malformed input; they never crash on documented grammar violations.
Writers emit deterministic output (intent sections in lexicographic order)
so that golden files are stable across runs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError, CorpusError

INTENT_NAME_RE = re.compile(r"^[a-z0-9_]+$")
_SECTION_RE = re.compile(r"^## (intent|synonym|regex):(.*)$")
_ANNOTATION_RE = re.compile(r"\[([^\]]*)\]\(([^)]*)\)")


@dataclass(frozen=True)
class EntitySpan:
    """A typed span of an utterance, in codepoint offsets (end exclusive)."""

    start: int
    end: int
    value: str
    entity: str

    def validate(self, text: str) -> None:
        if not (0 <= self.start < self.end <= len(text)):
            raise CorpusError(
                f"entity span ({self.start},{self.end}) out of bounds for text of length {len(text)}"
            )
        if text[self.start : self.end] != self.value:
            raise CorpusError(
                f"entity span ({self.start},{self.end}) does not slice to {self.value!r}"
            )


@dataclass(frozen=True)
class TrainingExample:
    """One labeled utterance with optional entity annotations."""

    text: str
    intent: str
    entities: tuple[EntitySpan, ...] = ()

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError("training example text is empty")
        if not INTENT_NAME_RE.match(self.intent):
            raise CorpusError(f"invalid intent name {self.intent!r}")
        prev_end = -1
        for span in sorted(self.entities, key=lambda s: s.start):
            span.validate(self.text)
            if span.start < prev_end:
                raise CorpusError(f"overlapping entity annotations in {self.text!r}")
            prev_end = span.end


@dataclass(frozen=True)
class StoryStep:
    user_intent: str
    actions: tuple[str, ...]


@dataclass(frozen=True)
class Story:
    """A training conversation: alternating user intents and bot actions."""

    name: str
    steps: tuple[StoryStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise CorpusError(f"story {self.name!r} has no steps")
        for step in self.steps:
            if not step.actions:
                raise CorpusError(
                    f"story {self.name!r}: step for intent {step.user_intent!r} has no actions"
                )


@dataclass(frozen=True)
class ResponseTemplate:
    action: str
    variants: tuple[str, ...]

    def __post_init__(self):
        if not self.variants:
            raise CorpusError(f"response template {self.action!r} has empty variants")


@dataclass(frozen=True)
class RegexPatternDef:
    """A named regular expression used for featurizing and entity extraction."""

    name: str
    pattern: str

    def __post_init__(self):
        try:
            re.compile(self.pattern)
        except re.error as exc:
            raise ConfigError(f"invalid regex for {self.name!r}: {exc}") from exc

    def compiled(self) -> re.Pattern:
        return re.compile(self.pattern)


class SynonymTable:
    """Maps surface forms to canonical entity values.

    Lookup is case-insensitive after trimming. Canonical values are fixed
    points: mapping a canonical value returns itself, so applying the table
    twice equals applying it once.
    """

    def __init__(self, mapping: dict[str, str] | None = None):
        self._map: dict[str, str] = {}
        for surface, canonical in (mapping or {}).items():
            self.add(surface, canonical)

    def add(self, surface: str, canonical: str) -> None:
        self._map[surface.strip().lower()] = canonical
        self._map.setdefault(canonical.strip().lower(), canonical)

    def canonical(self, surface: str) -> str | None:
        return self._map.get(surface.strip().lower())

    def as_dict(self) -> dict[str, str]:
        return dict(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other) -> bool:
        return isinstance(other, SynonymTable) and self._map == other._map

    def __repr__(self) -> str:
        return f"SynonymTable({self._map!r})"


def _parse_annotated_text(raw: str, line_no: int) -> tuple[str, tuple[EntitySpan, ...]]:
    """Strip [value](entity) annotations, computing spans on the stripped text."""
    out: list[str] = []
    spans: list[EntitySpan] = []
    pos = 0
    stripped_len = 0
    for m in _ANNOTATION_RE.finditer(raw):
        value, entity = m.group(1), m.group(2)
        if not value:
            raise CorpusError("empty entity value in annotation", line=line_no)
        if not INTENT_NAME_RE.match(entity):
            raise CorpusError(f"invalid entity name {entity!r} in annotation", line=line_no)
        out.append(raw[pos : m.start()])
        stripped_len += m.start() - pos
        spans.append(EntitySpan(stripped_len, stripped_len + len(value), value, entity))
        out.append(value)
        stripped_len += len(value)
        pos = m.end()
    out.append(raw[pos:])
    return "".join(out), tuple(spans)


def parse_nlu_markdown(
    text: str,
) -> tuple[list[TrainingExample], SynonymTable, list[RegexPatternDef]]:
    """Parse an nlu.md document into examples, synonyms and regex patterns."""
    examples: list[TrainingExample] = []
    synonyms = SynonymTable()
    patterns: list[RegexPatternDef] = []
    section: tuple[str, str] | None = None

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("## "):
            m = _SECTION_RE.match(line)
            if not m:
                raise CorpusError(f"malformed section header {line!r}", line=line_no)
            kind, name = m.group(1), m.group(2).strip()
            if not name:
                raise CorpusError(f"missing name in section header {line!r}", line=line_no)
            if kind in ("intent", "regex") and not INTENT_NAME_RE.match(name):
                raise CorpusError(f"invalid {kind} name {name!r}", line=line_no)
            section = (kind, name)
        elif line.startswith("- "):
            if section is None:
                raise CorpusError("bullet line before any section header", line=line_no)
            kind, name = section
            content = line[2:]
            if kind == "intent":
                stripped, spans = _parse_annotated_text(content, line_no)
                try:
                    examples.append(TrainingExample(stripped, name, spans))
                except CorpusError as exc:
                    raise CorpusError(str(exc), line=line_no) from exc
            elif kind == "synonym":
                if not content.strip():
                    raise CorpusError("empty synonym surface form", line=line_no)
                synonyms.add(content, name)
            else:
                try:
                    patterns.append(RegexPatternDef(name, content))
                except ConfigError as exc:
                    raise CorpusError(str(exc), line=line_no) from exc
        else:
            raise CorpusError(f"unexpected line {line!r}", line=line_no)
    return examples, synonyms, patterns


def _inline_annotations(example: TrainingExample) -> str:
    parts: list[str] = []
    pos = 0
    for span in sorted(example.entities, key=lambda s: s.start):
        parts.append(example.text[pos : span.start])
        parts.append(f"[{span.value}]({span.entity})")
        pos = span.end
    parts.append(example.text[pos:])
    return "".join(parts)


def write_nlu_markdown(
    examples: list[TrainingExample],
    synonyms: SynonymTable,
    patterns: list[RegexPatternDef],
) -> str:
    """Serialize an NLU corpus; the output parses back to the same structures.

    Intent sections come out in lexicographic order (examples keep their
    relative order within an intent), so parse(write(x)) is the identity on
    corpora already grouped that way and a canonicalization otherwise.
    """
    lines: list[str] = []
    by_intent: dict[str, list[TrainingExample]] = {}
    for ex in examples:
        by_intent.setdefault(ex.intent, []).append(ex)
    for intent in sorted(by_intent):
        lines.append(f"## intent:{intent}")
        for ex in by_intent[intent]:
            lines.append(f"- {_inline_annotations(ex)}")
        lines.append("")

    by_canonical: dict[str, list[str]] = {}
    for surface, canonical in synonyms.as_dict().items():
        if surface != canonical.strip().lower():
            by_canonical.setdefault(canonical, []).append(surface)
    for canonical in sorted(by_canonical):
        lines.append(f"## synonym:{canonical}")
        for surface in sorted(by_canonical[canonical]):
            lines.append(f"- {surface}")
        lines.append("")

    by_name: dict[str, list[str]] = {}
    for pat in patterns:
        by_name.setdefault(pat.name, []).append(pat.pattern)
    for name in sorted(by_name):
        lines.append(f"## regex:{name}")
        for pattern in by_name[name]:
            lines.append(f"- {pattern}")
        lines.append("")

    return "\n".join(lines)


def parse_stories_markdown(text: str) -> list[Story]:
    """Parse stories.md (or conversationtest.md, same grammar) into stories."""
    stories: list[Story] = []
    name: str | None = None
    name_line = 0
    steps: list[StoryStep] = []
    current_intent: str | None = None
    current_actions: list[str] = []

    def close_step(line_no: int):
        nonlocal current_intent, current_actions
        if current_intent is not None:
            if not current_actions:
                raise CorpusError(
                    f"step for intent {current_intent!r} has no actions", line=line_no
                )
            steps.append(StoryStep(current_intent, tuple(current_actions)))
        current_intent = None
        current_actions = []

    def close_story(line_no: int):
        nonlocal name, steps
        if name is not None:
            close_step(line_no)
            if not steps:
                raise CorpusError(f"story {name!r} has no steps", line=name_line)
            stories.append(Story(name, tuple(steps)))
        name = None
        steps = []

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("## "):
            close_story(line_no)
            name = line[3:].strip()
            name_line = line_no
            if not name:
                raise CorpusError("story header has no name", line=line_no)
        elif line.startswith("* "):
            if name is None:
                raise CorpusError("intent line before any story header", line=line_no)
            close_step(line_no)
            intent = line[2:].strip()
            if not INTENT_NAME_RE.match(intent):
                raise CorpusError(f"invalid intent name {intent!r}", line=line_no)
            current_intent = intent
        elif line.lstrip().startswith("- ") and line != line.lstrip():
            if current_intent is None:
                raise CorpusError("action line before any intent line", line=line_no)
            action = line.lstrip()[2:].strip()
            if not INTENT_NAME_RE.match(action):
                raise CorpusError(f"invalid action name {action!r}", line=line_no)
            current_actions.append(action)
        else:
            raise CorpusError(f"unexpected line {line!r}", line=line_no)
    close_story(len(text.splitlines()) + 1)
    return stories


def write_stories_markdown(stories: list[Story]) -> str:
    """Serialize stories; parse(write(x)) == x, order preserved."""
    lines: list[str] = []
    for story in stories:
        lines.append(f"## {story.name}")
        for step in story.steps:
            lines.append(f"* {step.user_intent}")
            for action in step.actions:
                lines.append(f"  - {action}")
        lines.append("")
    return "\n".join(lines)


def _reject_duplicate_keys(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise CorpusError(f"duplicate response key {key!r}")
        seen[key] = value
    return seen


def parse_responses(text: str) -> dict[str, ResponseTemplate]:
    """Parse responses.json: {"<action>": ["variant", ...], ...}."""
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise CorpusError("responses document must be a JSON object")
    templates: dict[str, ResponseTemplate] = {}
    for action, variants in data.items():
        if not isinstance(variants, list) or not all(isinstance(v, str) for v in variants):
            raise CorpusError(f"variants for {action!r} must be a list of strings")
        if not variants:
            raise CorpusError(f"empty variants for {action!r}")
        templates[action] = ResponseTemplate(action, tuple(variants))
    return templates


def write_responses(templates: dict[str, ResponseTemplate]) -> str:
    """Serialize responses to JSON with sorted keys; round-trips exactly."""
    payload = {t.action: list(t.variants) for t in templates.values()}
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


PIPELINE_COMPONENTS = {
    "whitespace_tokenizer",
    "char_ngram_featurizer",
    "regex_featurizer",
    "lexical_featurizer",
    "synonym_mapper",
    "softmax_classifier",
}
CLASSIFIER_COMPONENTS = {"softmax_classifier"}
POLICY_NAMES = {"memoization", "fallback", "ted", "knowledge_graph"}


@dataclass(frozen=True)
class ComponentConfig:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ProjectConfig:
    """Parsed config.yml: NLU pipeline, policy stack and language tag."""

    pipeline: tuple[ComponentConfig, ...]
    policies: tuple[ComponentConfig, ...]
    language: str = "ur-latn"

    def __post_init__(self):
        classifiers = [c for c in self.pipeline if c.name in CLASSIFIER_COMPONENTS]
        if len(classifiers) != 1 or self.pipeline[-1].name not in CLASSIFIER_COMPONENTS:
            raise ConfigError("pipeline must end with exactly one classifier component")
        if not self.policies:
            raise ConfigError("policy list must be non-empty")

    def component(self, name: str) -> ComponentConfig | None:
        for c in self.pipeline:
            if c.name == name:
                return c
        return None

    def policy(self, name: str) -> ComponentConfig | None:
        for p in self.policies:
            if p.name == name:
                return p
        return None


def _parse_component_list(raw, kind: str, known: set[str]) -> tuple[ComponentConfig, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{kind} must be a non-empty list")
    out = []
    for item in raw:
        if not isinstance(item, dict) or "name" not in item:
            raise ConfigError(f"each {kind} entry needs a 'name' key, got {item!r}")
        params = {k: v for k, v in item.items() if k != "name"}
        name = item["name"]
        if name not in known:
            raise ConfigError(f"unknown {kind} component {name!r}")
        out.append(ComponentConfig(name, params))
    return tuple(out)


def parse_config(text: str) -> ProjectConfig:
    """Parse config.yml with top-level 'pipeline:' and 'policies:' lists."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    if "pipeline" not in data or "policies" not in data:
        raise ConfigError("config needs both 'pipeline' and 'policies' sections")
    pipeline = _parse_component_list(data["pipeline"], "pipeline", PIPELINE_COMPONENTS)
    policies = _parse_component_list(data["policies"], "policies", POLICY_NAMES)
    language = data.get("language", "ur-latn")
    if not isinstance(language, str) or not language:
        raise ConfigError("language must be a non-empty string")
    return ProjectConfig(pipeline, policies, language)


DEFAULT_CONFIG_YML = """\
language: ur-latn
pipeline:
  - name: whitespace_tokenizer
  - name: char_ngram_featurizer
    min_ngram: 1
    max_ngram: 4
  - name: regex_featurizer
  - name: lexical_featurizer
  - name: synonym_mapper
  - name: softmax_classifier
    learning_rate: 0.1
    epochs: 300
    l2: 0.0001
policies:
  - name: memoization
    max_history: 3
  - name: fallback
    nlu_threshold: 0.4
    action: utter_fallback
  - name: ted
    ted_threshold: 0.35
  - name: knowledge_graph
"""
