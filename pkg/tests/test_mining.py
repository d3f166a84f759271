"""Topic mining: preprocessing, the Gibbs sampler, divergences, reports."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import corpora
import oracles
from baatcheet.corpus import parse_nlu_markdown
from baatcheet.errors import CorpusError, TrainingError
from baatcheet.mining import (
    KSweepReport,
    TokenizedDoc,
    WordVocabulary,
    export_intent_draft,
    fit_lda,
    js_divergence,
    load_stopwords,
    mean_pairwise_distance,
    perplexity,
    preprocess_corpus,
    rebuild_counts,
    summarize,
    sweep_k,
    token_share,
    top_terms,
    topic_distance_matrix,
    verify_counts,
)


class TestStopwords:
    def test_bundled_list(self):
        words = load_stopwords()
        assert len(words) > 50
        assert {"ka", "ki", "hai", "mein"} <= words

    def test_custom_file(self, tmp_path):
        p = tmp_path / "stop.txt"
        p.write_text("# comment\nfoo\n\nBAR\n", encoding="utf-8")
        assert load_stopwords(p) == frozenset({"foo", "bar"})


class TestPreprocess:
    def test_lowercase_and_stopword_removal(self):
        docs, vocab = preprocess_corpus(["Fees KITNI hai", "hostel fees hai"], {"hai"})
        assert vocab.terms == ("fees", "hostel", "kitni")
        assert docs[0].tokens == (vocab.index()["fees"], vocab.index()["kitni"])

    def test_length_filter_keeps_ids(self):
        docs, _ = preprocess_corpus(
            ["one", "two words here", "also two words", "x " * 60], set(), min_tokens=2, max_tokens=50
        )
        assert [d.id for d in docs] == [1, 2]

    def test_empty_after_filtering(self):
        with pytest.raises(CorpusError):
            preprocess_corpus(["ka ki", "ka"], {"ka", "ki"})

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            preprocess_corpus(["a b"], set(), min_tokens=3, max_tokens=2)

    def test_vocabulary_sorted_dense(self):
        _, vocab = preprocess_corpus(["zz aa mm", "aa mm qq"], set())
        assert list(vocab.terms) == sorted(vocab.terms)
        assert sorted(vocab.index().values()) == list(range(vocab.size))


def _small_fit(iterations=30, seed=3, k=2):
    docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
    return fit_lda(docs, vocab, k=k, alpha=0.5, beta=0.01, iterations=iterations, seed=seed), docs, vocab


class TestFitLda:
    def test_deterministic(self):
        a, _, _ = _small_fit()
        b, _, _ = _small_fit()
        assert np.array_equal(a.assignments, b.assignments)
        assert np.array_equal(a.topic_word_counts, b.topic_word_counts)
        assert np.array_equal(a.doc_topic_counts, b.doc_topic_counts)

    def test_seed_matters(self):
        # one sweep only: converged fits may agree, trajectories must not
        a, _, _ = _small_fit(iterations=1, seed=3)
        b, _, _ = _small_fit(iterations=1, seed=4)
        assert not np.array_equal(a.assignments, b.assignments)

    def test_matches_reference_sampler_exactly(self):
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        doc_tokens = [list(d.tokens) for d in docs]
        for seed in (0, 1, 7):
            model = fit_lda(docs, vocab, k=2, alpha=0.5, beta=0.01, iterations=15, seed=seed)
            expected = oracles.gibbs_assignments(
                doc_tokens, vocab.size, k=2, alpha=0.5, beta=0.01, iterations=15, seed=seed
            )
            assert model.assignments.tolist() == expected

    def test_reference_match_with_k3(self):
        docs, vocab = preprocess_corpus(
            ["aa bb cc", "bb cc dd", "dd ee aa", "ee aa bb"], set(), min_tokens=1
        )
        model = fit_lda(docs, vocab, k=3, alpha=0.3, beta=0.05, iterations=10, seed=11)
        expected = oracles.gibbs_assignments(
            [list(d.tokens) for d in docs], vocab.size, 3, 0.3, 0.05, 10, 11
        )
        assert model.assignments.tolist() == expected

    def test_count_consistency_after_fit(self):
        model, _, _ = _small_fit()
        verify_counts(model)  # must not raise
        doc_topic, topic_word = rebuild_counts(
            model.assignments,
            model.token_doc_ids,
            model.token_word_ids,
            model.doc_topic_counts.shape[0],
            model.k,
            model.vocabulary.size,
        )
        assert np.array_equal(doc_topic, model.doc_topic_counts)
        assert np.array_equal(topic_word, model.topic_word_counts)
        assert int(model.topic_word_counts.sum()) == model.n_tokens

    def test_tampered_counts_detected(self):
        model, _, _ = _small_fit()
        bad = model.topic_word_counts.copy()
        bad[0, 0] += 1
        import dataclasses

        tampered = dataclasses.replace(model, topic_word_counts=bad)
        with pytest.raises(TrainingError, match="inconsistent"):
            verify_counts(tampered)

    def test_check_every_runs(self):
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        model = fit_lda(docs, vocab, 2, alpha=0.5, iterations=10, seed=0, check_every=3)
        verify_counts(model)

    def test_default_alpha_is_50_over_k(self):
        model, _, _ = _small_fit()
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        defaulted = fit_lda(docs, vocab, k=2, beta=0.01, iterations=5, seed=3)
        assert defaulted.alpha == 25.0

    @pytest.mark.parametrize(
        "kwargs,message",
        [
            ({"k": 1}, "K must be >= 2"),
            ({"k": 2, "iterations": 0}, "iterations"),
            ({"k": 1000}, "exceeds total token count"),
        ],
    )
    def test_parameter_errors(self, kwargs, message):
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        merged = {"alpha": 0.5, "iterations": 5, "seed": 0, **kwargs}
        with pytest.raises(TrainingError, match=message):
            fit_lda(docs, vocab, **merged)

    def test_no_documents(self):
        with pytest.raises(TrainingError, match="no documents"):
            fit_lda([], WordVocabulary(("a",)), k=2, iterations=1)


class TestTopTerms:
    def test_ranked_by_count_then_lexicographic(self):
        model, _, vocab = _small_fit(iterations=50)
        for t in range(model.k):
            terms = top_terms(model, t, 3)
            counts = [model.topic_word_counts[t][vocab.index()[w]] for w in terms]
            assert counts == sorted(counts, reverse=True)
        expected = oracles.topic_top_terms(
            model.assignments.tolist(),
            [model.token_word_ids[model.token_doc_ids == d].tolist() for d in range(6)],
            list(vocab.terms),
            model.k,
            3,
        )
        assert [top_terms(model, t, 3) for t in range(model.k)] == expected

    def test_n_exceeding_vocab(self):
        model, _, vocab = _small_fit()
        assert len(top_terms(model, 0, 100)) == vocab.size

    def test_out_of_range_topic(self):
        model, _, _ = _small_fit()
        with pytest.raises(ValueError):
            top_terms(model, 5, 3)


class TestTokenShare:
    def test_sums_to_one(self):
        model, _, _ = _small_fit()
        shares = token_share(model)
        assert len(shares) == model.k
        assert abs(sum(shares) - 1.0) <= 1e-9

    def test_matches_bincount(self):
        model, _, _ = _small_fit()
        counts = np.bincount(model.assignments, minlength=model.k)
        assert token_share(model) == (counts / model.n_tokens).tolist()


def _js_reference(p, q):
    m = [(a + b) / 2 for a, b in zip(p, q)]
    total = 0.0
    for a, b in zip(p, m):
        if a > 0:
            total += 0.5 * a * math.log2(a / b)
    for a, b in zip(q, m):
        if a > 0:
            total += 0.5 * a * math.log2(a / b)
    return total


class TestJsDivergence:
    def test_identical_is_zero(self):
        p = np.array([0.2, 0.3, 0.5])
        assert js_divergence(p, p) == 0.0

    def test_disjoint_is_exactly_one(self):
        assert js_divergence(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
        assert (
            js_divergence(np.array([0.5, 0.5, 0.0, 0.0]), np.array([0.0, 0.0, 0.25, 0.75]))
            == 1.0
        )

    def test_hand_value(self):
        p = np.array([1.0, 0.0])
        q = np.array([0.5, 0.5])
        assert js_divergence(p, q) == pytest.approx(_js_reference([1, 0], [0.5, 0.5]), abs=1e-15)

    @given(
        st.lists(st.integers(0, 10), min_size=2, max_size=8).filter(lambda v: sum(v) > 0),
        st.data(),
    )
    @settings(max_examples=200, deadline=None)
    def test_properties(self, counts_p, data):
        counts_q = data.draw(
            st.lists(st.integers(0, 10), min_size=len(counts_p), max_size=len(counts_p)).filter(
                lambda v: sum(v) > 0
            )
        )
        p = np.array(counts_p, dtype=float) / sum(counts_p)
        q = np.array(counts_q, dtype=float) / sum(counts_q)
        d_pq = js_divergence(p, q)
        d_qp = js_divergence(q, p)
        assert -1e-12 <= d_pq <= 1.0 + 1e-12
        assert abs(d_pq - d_qp) <= 1e-12
        assert d_pq == pytest.approx(_js_reference(p.tolist(), q.tolist()), abs=1e-12)


class TestDistanceMatrix:
    def test_symmetric_zero_diagonal(self):
        model, _, _ = _small_fit(iterations=40)
        matrix = topic_distance_matrix(model)
        assert np.abs(matrix - matrix.T).max() <= 1e-12
        assert np.diagonal(matrix).tolist() == [0.0] * model.k

    def test_mean_is_offdiagonal_average(self):
        model, _, _ = _small_fit(iterations=40)
        matrix = topic_distance_matrix(model)
        k = model.k
        expected = matrix.sum() / (k * (k - 1))
        assert mean_pairwise_distance(model) == pytest.approx(expected, abs=1e-15)


class TestPerplexity:
    def test_single_word_vocabulary_floor(self):
        docs = [TokenizedDoc(0, (0, 0)), TokenizedDoc(1, (0, 0))]
        vocab = WordVocabulary(("only",))
        model = fit_lda(docs, vocab, k=2, alpha=0.5, beta=0.01, iterations=5, seed=0)
        assert perplexity(model) == pytest.approx(1.0, abs=1e-12)

    def test_at_least_one(self):
        model, _, _ = _small_fit()
        assert perplexity(model) >= 1.0


class TestSweep:
    def test_entries_sorted_and_deduplicated(self):
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        report = sweep_k(docs, vocab, [3, 2, 3], iterations=10, seed=5)
        assert [e.k for e in report.entries] == [2, 3]

    def test_per_k_seed_offsets(self):
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        report = sweep_k(docs, vocab, [2], iterations=10, seed=5)
        direct = fit_lda(docs, vocab, 2, alpha=25.0, iterations=10, seed=7)
        assert report.entries[0].summaries == summarize(direct, 10)

    def test_empty_ks(self):
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        with pytest.raises(ValueError):
            sweep_k(docs, vocab, [])

    def test_report_json_round_trip(self):
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        report = sweep_k(docs, vocab, [2, 3], iterations=10, seed=5, top_n=3)
        assert KSweepReport.from_json(report.to_json()) == report

    def test_shares_in_report_sum_to_one(self):
        docs, vocab = preprocess_corpus(corpora.two_topic_docs(), set(), min_tokens=1)
        report = sweep_k(docs, vocab, [2, 3], iterations=10, seed=5)
        for entry in report.entries:
            assert abs(sum(s.token_share for s in entry.summaries) - 1.0) <= 1e-9


class TestExportDraft:
    def test_draft_parses_back(self):
        model, docs, _ = _small_fit(iterations=60)
        text = export_intent_draft(model, docs, "mined")
        examples, _, _ = parse_nlu_markdown(text)
        assert len(examples) == 6
        assert all(e.intent.startswith("mined_") for e in examples)

    def test_empty_topics_omitted(self):
        docs = [TokenizedDoc(0, (0,) * 8), TokenizedDoc(1, (0,) * 8)]
        vocab = WordVocabulary(("word",))
        model = fit_lda(docs, vocab, k=4, alpha=0.01, beta=0.01, iterations=80, seed=1)
        text = export_intent_draft(model, docs)
        examples, _, _ = parse_nlu_markdown(text)
        claimed = {e.intent for e in examples}
        assert 1 <= len(claimed) <= 2

    def test_annotation_characters_scrubbed(self):
        docs = [TokenizedDoc(0, (0, 1)), TokenizedDoc(1, (1, 0))]
        vocab = WordVocabulary(("[x](y)", "plain"))
        model = fit_lda(docs, vocab, k=2, alpha=0.5, iterations=5, seed=0)
        text = export_intent_draft(model, docs)
        examples, _, _ = parse_nlu_markdown(text)
        assert all("[" not in e.text for e in examples)

    def test_prefix_sanitized(self):
        model, docs, _ = _small_fit()
        text = export_intent_draft(model, docs, "My Topics!")
        examples, _, _ = parse_nlu_markdown(text)
        assert all(e.intent.startswith("my_topics_") for e in examples)

    def test_mismatched_docs_rejected(self):
        model, docs, _ = _small_fit()
        with pytest.raises(ValueError):
            export_intent_draft(model, docs[:-1])
