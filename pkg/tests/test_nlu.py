"""NLU pipeline: tokenization, feature blocks, training, entity extraction."""

import numpy as np
import pytest

from baatcheet.corpus import EntitySpan, RegexPatternDef, SynonymTable, TrainingExample
from baatcheet.errors import TrainingError
from baatcheet.nlu import (
    Hyperparams,
    IntentModel,
    LexicalConfig,
    NluPipeline,
    SparseVector,
    apply_synonyms,
    build_gazetteer,
    build_vocabulary,
    extract_entities,
    featurize,
    parse,
    rank_intents,
    tokenize,
    train_classifier,
)


class TestTokenize:
    def test_offsets(self):
        tokens = tokenize("  salam   dunya ")
        assert [(t.text, t.start, t.end) for t in tokens] == [
            ("salam", 2, 7),
            ("dunya", 10, 15),
        ]

    def test_empty(self):
        assert tokenize("") == []
        assert tokenize("   \t ") == []

    def test_punctuation_stays_attached(self):
        tokens = tokenize("fees?  21f-1234")
        assert [t.text for t in tokens] == ["fees?", "21f-1234"]


class TestVocabulary:
    def test_within_token_grams_only(self):
        vocab = build_vocabulary([TrainingExample("ab cd", "x"), TrainingExample("ab cd", "y")], 2, 2)
        assert set(vocab.index) == {"ab", "cd"}
        # "b c" spans a boundary and must not appear

    def test_lowercased(self):
        vocab = build_vocabulary(
            [TrainingExample("AB", "x"), TrainingExample("ab", "y")], 1, 2
        )
        assert set(vocab.index) == {"a", "b", "ab"}

    def test_indices_lexicographic_and_dense(self):
        vocab = build_vocabulary(
            [TrainingExample("ba", "x"), TrainingExample("ab", "y")], 1, 2
        )
        ordered = sorted(vocab.index, key=vocab.index.__getitem__)
        assert ordered == sorted(vocab.index)
        assert sorted(vocab.index.values()) == list(range(vocab.dimension))

    def test_range_covers_1_to_4_by_default(self):
        vocab = build_vocabulary([TrainingExample("salam", "x"), TrainingExample("oy", "y")])
        assert "s" in vocab.index and "sala" in vocab.index
        assert "salam" not in vocab.index

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            build_vocabulary([TrainingExample("ab", "x")], 3, 2)

    def test_empty_corpus(self):
        with pytest.raises(TrainingError):
            build_vocabulary([])

    def test_serialization_round_trip(self):
        vocab = build_vocabulary([TrainingExample("salam", "x"), TrainingExample("oy", "y")])
        from baatcheet.nlu import Vocabulary

        assert Vocabulary.from_dict(vocab.to_dict()) == vocab


class TestFeaturize:
    def _vocab(self):
        return build_vocabulary(
            [TrainingExample("ab", "x"), TrainingExample("cd", "y")], 1, 2
        )

    def test_ngram_counts(self):
        vocab = self._vocab()
        vec = featurize("ab ab cd", vocab, [], LexicalConfig())
        assert vec.entries[vocab.index["ab"]] == 2.0
        assert vec.entries[vocab.index["cd"]] == 1.0
        assert vec.entries[vocab.index["a"]] == 2.0

    def test_oov_grams_dropped(self):
        vocab = self._vocab()
        vec = featurize("zz", vocab, [], LexicalConfig())
        ngram_part = {i: v for i, v in vec.entries.items() if i < vocab.dimension}
        assert ngram_part == {}

    def test_regex_block_offsets(self):
        vocab = self._vocab()
        patterns = [RegexPatternDef("digits", r"\d+"), RegexPatternDef("roll", r"[a-z]-\d")]
        vec = featurize("x-1 22", vocab, patterns, LexicalConfig())
        assert vec.entries[vocab.dimension + 0] == 1.0
        assert vec.entries[vocab.dimension + 1] == 1.0
        vec2 = featurize("plain", vocab, patterns, LexicalConfig())
        assert vocab.dimension not in vec2.entries
        assert vocab.dimension + 1 not in vec2.entries

    def test_lexical_block(self):
        vocab = self._vocab()
        config = LexicalConfig()
        base = vocab.dimension
        vec = featurize("ab cd 9", vocab, [], config)
        assert vec.entries[base + 0] == 1.0  # contains digit
        assert vec.entries[base + 1] == 1.0  # all lower
        assert vec.entries[base + 2 + 2] == 1.0  # 3 tokens -> bucket index 2
        # mean length 7/3 <= 3 -> first length bucket
        assert vec.entries[base + 2 + 4 + 0] == 1.0

    def test_token_count_overflow_bucket(self):
        vocab = self._vocab()
        base = vocab.dimension
        vec = featurize("a b c d e f", vocab, [], LexicalConfig())
        assert vec.entries[base + 2 + 3] == 1.0  # 4+ bucket

    def test_uppercase_not_islower(self):
        vocab = self._vocab()
        base = vocab.dimension
        vec = featurize("AB", vocab, [], LexicalConfig())
        assert base + 1 not in vec.entries
        # but the n-gram block still sees the lowercased text
        assert vec.entries[vocab.index["ab"]] == 1.0

    def test_dimension(self):
        vocab = self._vocab()
        patterns = [RegexPatternDef("p", "x")]
        vec = featurize("ab", vocab, patterns, LexicalConfig())
        assert vec.dimension == vocab.dimension + 1 + LexicalConfig().size
        assert LexicalConfig().size == 9

    def test_dense_round_trip(self):
        vec = SparseVector(5, {1: 2.0, 4: 1.0})
        assert vec.to_dense().tolist() == [0.0, 2.0, 0.0, 0.0, 1.0]


TRAIN = [
    TrainingExample("salam", "greet"),
    TrainingExample("assalam o alaikum", "greet"),
    TrainingExample("hello ji", "greet"),
    TrainingExample("khuda hafiz", "goodbye"),
    TrainingExample("allah hafiz", "goodbye"),
    TrainingExample("chalta hoon", "goodbye"),
    TrainingExample("fees kitni hai", "fee_inquiry"),
    TrainingExample("fees batao", "fee_inquiry"),
    TrainingExample("kitna kharcha hai", "fee_inquiry"),
]


class TestTrainClassifier:
    def test_labels_sorted(self):
        model = train_classifier(TRAIN)
        assert model.labels == ("fee_inquiry", "goodbye", "greet")

    def test_learns_training_data(self):
        model = train_classifier(TRAIN)
        for ex in TRAIN:
            ranking = rank_intents(model, ex.text)
            assert ranking[0][0] == ex.intent

    def test_ranking_is_probability(self):
        model = train_classifier(TRAIN)
        ranking = rank_intents(model, "fees kitni hai")
        probs = [c for _, c in ranking]
        assert sum(probs) == pytest.approx(1.0, abs=1e-9)
        assert probs == sorted(probs, reverse=True)
        assert {n for n, _ in ranking} == set(model.labels)

    def test_single_intent_rejected(self):
        with pytest.raises(TrainingError, match="2 intents"):
            train_classifier([TrainingExample("salam", "greet")])

    def test_deterministic(self):
        a = train_classifier(TRAIN, hyperparams=Hyperparams(epochs=50))
        b = train_classifier(TRAIN, hyperparams=Hyperparams(epochs=50))
        assert np.array_equal(a.weights, b.weights)
        assert a.final_loss == b.final_loss

    def test_serialization_round_trip(self):
        model = train_classifier(TRAIN, patterns=[RegexPatternDef("num", r"\d+")])
        restored = IntentModel.from_dict(model.to_dict())
        assert restored.labels == model.labels
        assert np.array_equal(restored.weights, model.weights)
        assert rank_intents(restored, "fees batao") == rank_intents(model, "fees batao")


class TestEntityExtraction:
    GAZ = {"university": ["fast", "nust", "fast university"]}

    def test_regex_entities(self):
        spans = extract_entities("roll 21f-1234 hai", [RegexPatternDef("roll_number", r"\d{2}[a-z]-\d{4}")], {})
        assert spans == [EntitySpan(5, 13, "21f-1234", "roll_number")]

    def test_gazetteer_single_token(self):
        spans = extract_entities("nust ki fees", [], self.GAZ)
        assert spans == [EntitySpan(0, 4, "nust", "university")]

    def test_gazetteer_longest_match_wins(self):
        spans = extract_entities("fast university ki fees", [], self.GAZ)
        assert len(spans) == 1
        assert spans[0].value == "fast university"
        assert (spans[0].start, spans[0].end) == (0, 15)

    def test_case_insensitive_match_preserves_surface(self):
        spans = extract_entities("FAST ki fees", [], self.GAZ)
        assert spans == [EntitySpan(0, 4, "FAST", "university")]

    def test_multiple_entities_sorted_by_start(self):
        spans = extract_entities("fast ya nust", [], self.GAZ)
        assert [s.value for s in spans] == ["fast", "nust"]
        assert [s.start for s in spans] == [0, 8]

    def test_overlap_longer_beats_shorter(self):
        spans = extract_entities(
            "21f-1234",
            [RegexPatternDef("short", r"\d{2}"), RegexPatternDef("roll", r"\d{2}[a-z]-\d{4}")],
            {},
        )
        assert [s.entity for s in spans] == ["roll"]

    def test_tie_breaks_deterministic(self):
        spans = extract_entities(
            "abc",
            [RegexPatternDef("zeta", "abc"), RegexPatternDef("alpha", "abc")],
            {},
        )
        assert [s.entity for s in spans] == ["alpha"]

    def test_empty_regex_match_skipped(self):
        spans = extract_entities("abc", [RegexPatternDef("maybe", "x*")], {})
        assert spans == []

    def test_no_subtoken_gazetteer_match(self):
        spans = extract_entities("breakfast time", [], self.GAZ)
        assert spans == []


class TestSynonyms:
    def test_values_normalized_offsets_kept(self):
        table = SynonymTable({"fast uni": "fast_uni", "fast": "fast_uni"})
        spans = [EntitySpan(0, 8, "fast uni", "university")]
        out = apply_synonyms(spans, table)
        assert out == [EntitySpan(0, 8, "fast_uni", "university")]

    def test_unknown_value_untouched(self):
        table = SynonymTable({"fast": "fast_uni"})
        spans = [EntitySpan(0, 4, "nust", "university")]
        assert apply_synonyms(spans, table) == spans


class TestParse:
    def test_full_parse_shape(self):
        model = train_classifier(TRAIN)
        gaz = {"university": ["fast"]}
        table = SynonymTable({"fast": "fast_uni"})
        result = parse(model, "fast fees kitni hai", gazetteer=gaz, synonyms=table)
        assert result.top_intent == "fee_inquiry"
        assert 0.0 < result.top_confidence <= 1.0
        assert result.entities[0].value == "fast_uni"
        data = result.to_dict()
        assert data["ranking"][0]["name"] == "fee_inquiry"
        assert data["entities"][0] == {"start": 0, "end": 4, "value": "fast_uni", "entity": "university"}

    def test_pipeline_wrapper(self):
        model = train_classifier(TRAIN)
        pipe = NluPipeline(model=model, gazetteer={"university": ["nust"]})
        result = pipe.parse("nust fees batao")
        assert result.top_intent == "fee_inquiry"
        assert result.entities[0].entity == "university"


def test_build_gazetteer_from_annotations():
    examples = [
        TrainingExample(
            "fast ki fees", "fee_inquiry", (EntitySpan(0, 4, "fast", "university"),)
        ),
        TrainingExample(
            "NUST ki fees", "fee_inquiry", (EntitySpan(0, 4, "NUST", "university"),)
        ),
        TrainingExample("salam", "greet"),
    ]
    assert build_gazetteer(examples) == {"university": ["fast", "nust"]}
