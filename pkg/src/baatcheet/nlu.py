"""NLU pipeline: utterance in, ranked intents and entities out.

The pipeline is whitespace tokenization, three sparse feature blocks
(character n-gram counts, regex match flags, lexical-syntactic aggregates),
a softmax classifier over the concatenated blocks, and regex/gazetteer
entity extraction with synonym normalization.

Character n-grams stay within token boundaries and are lowercased, which
keeps the classifier stable under the casing noise typical of Roman Urdu
chat text. A trained :class:`IntentModel` is immutable; concurrent parse
calls against one model are safe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .corpus import EntitySpan, RegexPatternDef, SynonymTable, TrainingExample
from .errors import TrainingError
from . import softmax as _softmax

_TOKEN_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def tokenize(utterance: str) -> list[Token]:
    """Split on maximal whitespace runs; offsets are codepoint positions."""
    return [Token(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(utterance)]


@dataclass(frozen=True)
class Vocabulary:
    """Character n-gram vocabulary with dense, lexicographically assigned indices."""

    index: dict[str, int]
    n_min: int
    n_max: int

    @property
    def dimension(self) -> int:
        return len(self.index)

    def to_dict(self) -> dict:
        ordered = sorted(self.index, key=self.index.__getitem__)
        return {"ngrams": ordered, "n_min": self.n_min, "n_max": self.n_max}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(
            index={g: i for i, g in enumerate(data["ngrams"])},
            n_min=data["n_min"],
            n_max=data["n_max"],
        )


def _char_ngrams(text: str, n_min: int, n_max: int):
    for token in tokenize(text.lower()):
        chars = token.text
        for n in range(n_min, n_max + 1):
            for i in range(len(chars) - n + 1):
                yield chars[i : i + n]


def build_vocabulary(
    examples: list[TrainingExample], n_min: int = 1, n_max: int = 4
) -> Vocabulary:
    """Collect every within-token character n-gram of the corpus."""
    if not (1 <= n_min <= n_max <= 8):
        raise ValueError(f"n-gram bounds must satisfy 1 <= n_min <= n_max <= 8")
    if not examples:
        raise TrainingError("no training data")
    grams = set()
    for ex in examples:
        grams.update(_char_ngrams(ex.text, n_min, n_max))
    return Vocabulary(index={g: i for i, g in enumerate(sorted(grams))}, n_min=n_min, n_max=n_max)


@dataclass(frozen=True)
class SparseVector:
    dimension: int
    entries: dict[int, float]

    def __post_init__(self):
        assert all(0 <= i < self.dimension for i in self.entries)
        assert all(v != 0 for v in self.entries.values())

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dimension)
        for i, v in self.entries.items():
            dense[i] = v
        return dense


@dataclass(frozen=True)
class LexicalConfig:
    """Bucket boundaries for the lexical-syntactic feature block.

    token_count_buckets (1, 2, 3) means the one-hot buckets 1, 2, 3 and 4+;
    mean_length_buckets (3, 6) means <=3, 4-6 and 7+.
    """

    token_count_buckets: tuple[int, ...] = (1, 2, 3)
    mean_length_buckets: tuple[int, ...] = (3, 6)

    @property
    def size(self) -> int:
        # contains-digit + all-lower + one-hot count buckets + one-hot length buckets
        return 2 + (len(self.token_count_buckets) + 1) + (len(self.mean_length_buckets) + 1)

    def to_dict(self) -> dict:
        return {
            "token_count_buckets": list(self.token_count_buckets),
            "mean_length_buckets": list(self.mean_length_buckets),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LexicalConfig":
        return cls(
            tuple(data["token_count_buckets"]),
            tuple(data["mean_length_buckets"]),
        )


def _bucket(value: float, bounds: tuple[int, ...]) -> int:
    for i, bound in enumerate(bounds):
        if value <= bound:
            return i
    return len(bounds)


def featurize(
    utterance: str,
    vocabulary: Vocabulary,
    regex_patterns: list[RegexPatternDef],
    lexical_config: LexicalConfig,
) -> SparseVector:
    """Concatenate the three sparse blocks into one vector.

    Block 1: char n-gram counts (out-of-vocabulary grams dropped).
    Block 2: one binary flag per regex pattern, set if it matches anywhere.
    Block 3: lexical-syntactic aggregates of the whole utterance.
    """
    entries: dict[int, float] = {}
    for gram in _char_ngrams(utterance, vocabulary.n_min, vocabulary.n_max):
        col = vocabulary.index.get(gram)
        if col is not None:
            entries[col] = entries.get(col, 0.0) + 1.0

    base = vocabulary.dimension
    for p, pattern in enumerate(regex_patterns):
        if pattern.compiled().search(utterance):
            entries[base + p] = 1.0

    base += len(regex_patterns)
    if any(ch.isdigit() for ch in utterance):
        entries[base] = 1.0
    if utterance.islower():
        entries[base + 1] = 1.0
    tokens = tokenize(utterance)
    if tokens:
        count_slot = _bucket(len(tokens), lexical_config.token_count_buckets)
        entries[base + 2 + count_slot] = 1.0
        mean_len = sum(len(t.text) for t in tokens) / len(tokens)
        len_slot = _bucket(mean_len, lexical_config.mean_length_buckets)
        entries[base + 2 + len(lexical_config.token_count_buckets) + 1 + len_slot] = 1.0

    dimension = vocabulary.dimension + len(regex_patterns) + lexical_config.size
    return SparseVector(dimension, entries)


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.1
    epochs: int = 300
    l2: float = 1e-4
    seed: int = 42


@dataclass(frozen=True)
class IntentModel:
    """Trained softmax intent classifier plus everything needed to featurize."""

    labels: tuple[str, ...]
    weights: np.ndarray
    bias: np.ndarray
    vocabulary: Vocabulary
    patterns: tuple[RegexPatternDef, ...]
    lexical_config: LexicalConfig
    hyperparams: Hyperparams
    final_loss: float

    def featurize(self, utterance: str) -> SparseVector:
        return featurize(utterance, self.vocabulary, list(self.patterns), self.lexical_config)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "vocabulary": self.vocabulary.to_dict(),
            "patterns": [[p.name, p.pattern] for p in self.patterns],
            "lexical_config": self.lexical_config.to_dict(),
            "hyperparams": {
                "learning_rate": self.hyperparams.learning_rate,
                "epochs": self.hyperparams.epochs,
                "l2": self.hyperparams.l2,
                "seed": self.hyperparams.seed,
            },
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IntentModel":
        return cls(
            labels=tuple(data["labels"]),
            weights=np.array(data["weights"], dtype=float),
            bias=np.array(data["bias"], dtype=float),
            vocabulary=Vocabulary.from_dict(data["vocabulary"]),
            patterns=tuple(RegexPatternDef(n, p) for n, p in data["patterns"]),
            lexical_config=LexicalConfig.from_dict(data["lexical_config"]),
            hyperparams=Hyperparams(**data["hyperparams"]),
            final_loss=data["final_loss"],
        )


def train_classifier(
    examples: list[TrainingExample],
    patterns: list[RegexPatternDef] | None = None,
    hyperparams: Hyperparams = Hyperparams(),
    n_min: int = 1,
    n_max: int = 4,
    lexical_config: LexicalConfig = LexicalConfig(),
) -> IntentModel:
    """Train the intent classifier on featurized examples.

    Labels are ordered lexicographically and fixed at training time. Raises
    on a single-intent corpus (degenerate softmax) and on non-finite loss.
    """
    patterns = patterns or []
    labels = tuple(sorted({ex.intent for ex in examples}))
    if len(labels) < 2:
        raise TrainingError("need at least 2 intents to train a classifier")
    vocabulary = build_vocabulary(examples, n_min, n_max)
    label_index = {name: i for i, name in enumerate(labels)}

    vectors = [featurize(ex.text, vocabulary, patterns, lexical_config) for ex in examples]
    x = np.stack([v.to_dense() for v in vectors])
    y = np.array([label_index[ex.intent] for ex in examples])

    result = _softmax.fit(
        x,
        y,
        n_classes=len(labels),
        learning_rate=hyperparams.learning_rate,
        epochs=hyperparams.epochs,
        l2=hyperparams.l2,
        seed=hyperparams.seed,
    )
    return IntentModel(
        labels=labels,
        weights=result.weights,
        bias=result.bias,
        vocabulary=vocabulary,
        patterns=tuple(patterns),
        lexical_config=lexical_config,
        hyperparams=hyperparams,
        final_loss=result.final_loss,
    )


@dataclass(frozen=True)
class ParseResult:
    """Ranked intent confidences plus extracted, synonym-normalized entities."""

    ranking: tuple[tuple[str, float], ...]
    entities: tuple[EntitySpan, ...] = ()

    @property
    def top_intent(self) -> str:
        return self.ranking[0][0]

    @property
    def top_confidence(self) -> float:
        return self.ranking[0][1]

    def to_dict(self) -> dict:
        return {
            "ranking": [{"name": n, "confidence": c} for n, c in self.ranking],
            "entities": [
                {"start": s.start, "end": s.end, "value": s.value, "entity": s.entity}
                for s in self.entities
            ],
        }


def rank_intents(model: IntentModel, utterance: str) -> tuple[tuple[str, float], ...]:
    logits = model.weights @ model.featurize(utterance).to_dense() + model.bias
    probs = _softmax.softmax(logits)
    order = sorted(zip(model.labels, probs), key=lambda kv: (-kv[1], kv[0]))
    return tuple((name, float(p)) for name, p in order)


def extract_entities(
    utterance: str,
    regex_patterns: list[RegexPatternDef],
    gazetteer: dict[str, list[str]],
) -> list[EntitySpan]:
    """Union of regex matches and longest-match gazetteer hits.

    Overlaps are resolved deterministically: longer match wins, ties go to
    the leftmost, then lexicographic entity type. Gazetteer matching is
    token-aligned and case-insensitive; regex patterns match the raw text.
    """
    candidates: list[EntitySpan] = []
    for pattern in regex_patterns:
        for m in pattern.compiled().finditer(utterance):
            if m.start() < m.end():
                candidates.append(EntitySpan(m.start(), m.end(), m.group(0), pattern.name))

    tokens = tokenize(utterance)
    lowered = [t.text.lower() for t in tokens]
    surface_words: dict[tuple[str, ...], str] = {}
    for entity, surfaces in gazetteer.items():
        for surface in surfaces:
            words = tuple(surface.lower().split())
            if words:
                surface_words[words] = entity
    max_words = max((len(w) for w in surface_words), default=0)
    for i in range(len(tokens)):
        for width in range(min(max_words, len(tokens) - i), 0, -1):
            window = tuple(lowered[i : i + width])
            entity = surface_words.get(window)
            if entity is not None:
                start = tokens[i].start
                end = tokens[i + width - 1].end
                candidates.append(EntitySpan(start, end, utterance[start:end], entity))

    candidates.sort(key=lambda s: (-(s.end - s.start), s.start, s.entity, s.value))
    chosen: list[EntitySpan] = []
    for span in candidates:
        if all(span.end <= c.start or span.start >= c.end for c in chosen):
            chosen.append(span)
    chosen.sort(key=lambda s: s.start)
    return chosen


def apply_synonyms(spans: list[EntitySpan], table: SynonymTable) -> list[EntitySpan]:
    """Replace span values with canonical forms; offsets stay untouched."""
    out = []
    for span in spans:
        canonical = table.canonical(span.value)
        if canonical is not None and canonical != span.value:
            span = EntitySpan(span.start, span.end, canonical, span.entity)
        out.append(span)
    return out


def parse(
    model: IntentModel,
    utterance: str,
    patterns: list[RegexPatternDef] | None = None,
    gazetteer: dict[str, list[str]] | None = None,
    synonyms: SynonymTable | None = None,
) -> ParseResult:
    """Full NLU parse: intent ranking plus normalized entities."""
    ranking = rank_intents(model, utterance)
    spans = extract_entities(utterance, patterns or [], gazetteer or {})
    if synonyms is not None:
        spans = apply_synonyms(spans, synonyms)
    return ParseResult(ranking=ranking, entities=tuple(spans))


@dataclass(frozen=True)
class NluPipeline:
    """A trained model bundled with its extraction resources."""

    model: IntentModel
    patterns: tuple[RegexPatternDef, ...] = ()
    gazetteer: dict[str, list[str]] = field(default_factory=dict)
    synonyms: SynonymTable = field(default_factory=SynonymTable)

    def parse(self, utterance: str) -> ParseResult:
        return parse(self.model, utterance, list(self.patterns), self.gazetteer, self.synonyms)


def build_gazetteer(examples: list[TrainingExample]) -> dict[str, list[str]]:
    """Collect annotated entity surfaces per type from the training corpus."""
    gazetteer: dict[str, set[str]] = {}
    for ex in examples:
        for span in ex.entities:
            gazetteer.setdefault(span.entity, set()).add(span.value.lower())
    return {entity: sorted(surfaces) for entity, surfaces in sorted(gazetteer.items())}
