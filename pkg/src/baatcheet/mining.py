"""Draft-intent mining from unlabeled Roman Urdu question corpora.

Pipeline: lowercase and whitespace-tokenize each question, drop stopwords
and out-of-length documents, fit a topic model by collapsed Gibbs sampling,
then turn each topic into a draft intent section whose examples are the
documents the topic claimed. Topic counts can be swept over several K
values; the report carries per-topic key terms, token shares and the mean
pairwise Jensen-Shannon distance between topic-word distributions, which
shrinks as K outgrows the corpus and topics start to overlap.

Determinism contract: for a given seed the fit is bit-reproducible. The
sampler draws the initial assignments with one ``integers(0, K, n_tokens)``
call, then one ``random(n_tokens)`` call per sweep, consuming value i for
token i. Tokens are visited in corpus order: documents in list order, each
document's tokens left to right.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import SynonymTable, TrainingExample, write_nlu_markdown
from .errors import CorpusError, TrainingError

_NAME_SAFE = "abcdefghijklmnopqrstuvwxyz0123456789_"


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword list, one word per line; default is the bundled Roman
    Urdu function-word list. Blank lines and '#' comments are skipped."""
    if path is None:
        text = (
            resources.files("baatcheet").joinpath("data/stopwords_roman_urdu.txt").read_text("utf-8")
        )
    else:
        text = Path(path).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        word = line.strip()
        if word and not word.startswith("#"):
            words.add(word.lower())
    return frozenset(words)


@dataclass(frozen=True)
class WordVocabulary:
    """Corpus word list with dense indices assigned in lexicographic order."""

    terms: tuple[str, ...]

    def __post_init__(self):
        assert list(self.terms) == sorted(set(self.terms))

    @property
    def size(self) -> int:
        return len(self.terms)

    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}


@dataclass(frozen=True)
class TokenizedDoc:
    """One preprocessed document; id is its position in the raw input list."""

    id: int
    tokens: tuple[int, ...]

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError(f"document {self.id} has no tokens")


def preprocess_corpus(
    docs: list[str],
    stopwords: frozenset[str] | set[str],
    min_tokens: int = 2,
    max_tokens: int = 50,
) -> tuple[list[TokenizedDoc], WordVocabulary]:
    """Lowercase, whitespace-tokenize, drop stopwords, filter by length.

    Documents falling outside [min_tokens, max_tokens] after stopword
    removal are dropped; surviving docs keep their original list position
    as id, so gaps in the id sequence mark what was filtered.
    """
    if min_tokens < 1 or max_tokens < min_tokens:
        raise ValueError("need 1 <= min_tokens <= max_tokens")
    kept: list[tuple[int, list[str]]] = []
    for doc_id, raw in enumerate(docs):
        words = [w for w in raw.lower().split() if w not in stopwords]
        if min_tokens <= len(words) <= max_tokens:
            kept.append((doc_id, words))
    if not kept:
        raise CorpusError("empty corpus after preprocessing")
    vocabulary = WordVocabulary(tuple(sorted({w for _, words in kept for w in words})))
    index = vocabulary.index()
    tokenized = [
        TokenizedDoc(doc_id, tuple(index[w] for w in words)) for doc_id, words in kept
    ]
    return tokenized, vocabulary


@dataclass(frozen=True)
class TopicModel:
    """Fitted topic model state: counts, per-token assignments, provenance.

    token_doc_ids and token_word_ids give each token's document row and
    vocabulary index in sampling order, so the count matrices can always be
    rebuilt from assignments and checked against the stored ones.
    """

    k: int
    alpha: float
    beta: float
    topic_word_counts: np.ndarray
    doc_topic_counts: np.ndarray
    assignments: np.ndarray
    token_doc_ids: np.ndarray
    token_word_ids: np.ndarray
    doc_ids: tuple[int, ...]
    vocabulary: WordVocabulary
    seed: int
    iterations: int

    @property
    def n_tokens(self) -> int:
        return int(self.assignments.shape[0])

    def topic_totals(self) -> np.ndarray:
        return self.topic_word_counts.sum(axis=1)

    def smoothed_topic_words(self) -> np.ndarray:
        """Rows are the smoothed per-topic word distributions."""
        num = self.topic_word_counts + self.beta
        return num / num.sum(axis=1, keepdims=True)


def rebuild_counts(
    assignments: np.ndarray,
    token_doc_ids: np.ndarray,
    token_word_ids: np.ndarray,
    n_docs: int,
    k: int,
    v: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Recompute both count matrices from scratch off the assignment vector."""
    doc_topic = np.zeros((n_docs, k), dtype=np.int64)
    topic_word = np.zeros((k, v), dtype=np.int64)
    np.add.at(doc_topic, (token_doc_ids, assignments), 1)
    np.add.at(topic_word, (assignments, token_word_ids), 1)
    return doc_topic, topic_word


def verify_counts(model: TopicModel) -> None:
    """Raise if the stored count matrices disagree with the assignments."""
    doc_topic, topic_word = rebuild_counts(
        model.assignments,
        model.token_doc_ids,
        model.token_word_ids,
        model.doc_topic_counts.shape[0],
        model.k,
        model.vocabulary.size,
    )
    if not np.array_equal(doc_topic, model.doc_topic_counts):
        raise TrainingError("doc-topic counts inconsistent with assignments")
    if not np.array_equal(topic_word, model.topic_word_counts):
        raise TrainingError("topic-word counts inconsistent with assignments")


def fit_lda(
    docs: list[TokenizedDoc],
    vocabulary: WordVocabulary,
    k: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 1000,
    seed: int = 42,
    check_every: int | None = None,
) -> TopicModel:
    """Fit by collapsed Gibbs sampling; deterministic given seed.

    Each sweep resamples every token's topic from the collapsed conditional
    (doc_topic[d,k] + alpha) * (topic_word[k,w] + beta) / (topic_total[k]
    + V*beta), the token itself excluded from all counts. alpha defaults
    to 50/K. check_every runs a full count-consistency audit after every
    that many sweeps; a final audit always runs.
    """
    if k < 2:
        raise TrainingError(f"K must be >= 2, got {k}")
    if iterations < 1:
        raise TrainingError(f"iterations must be >= 1, got {iterations}")
    if not docs:
        raise TrainingError("no documents")
    if alpha is None:
        alpha = 50.0 / k
    v = vocabulary.size
    token_doc: list[int] = []
    token_word: list[int] = []
    for row, doc in enumerate(docs):
        for w in doc.tokens:
            if not 0 <= w < v:
                raise TrainingError(f"token index {w} outside vocabulary of size {v}")
            token_doc.append(row)
            token_word.append(w)
    n_tokens = len(token_word)
    if k > n_tokens:
        raise TrainingError(f"K={k} exceeds total token count {n_tokens}")

    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, size=n_tokens).tolist()
    doc_topic = [[0] * k for _ in range(len(docs))]
    topic_word = [[0] * v for _ in range(k)]
    topic_total = [0] * k
    for i in range(n_tokens):
        doc_topic[token_doc[i]][z[i]] += 1
        topic_word[z[i]][token_word[i]] += 1
        topic_total[z[i]] += 1

    vb = v * beta
    cum = [0.0] * k
    for sweep in range(iterations):
        u = rng.random(n_tokens)
        for i in range(n_tokens):
            d = token_doc[i]
            w = token_word[i]
            old = z[i]
            dt = doc_topic[d]
            dt[old] -= 1
            topic_word[old][w] -= 1
            topic_total[old] -= 1
            total = 0.0
            for t in range(k):
                total += (dt[t] + alpha) * (topic_word[t][w] + beta) / (topic_total[t] + vb)
                cum[t] = total
            target = u[i] * total
            new = 0
            last = k - 1
            while new < last and cum[new] <= target:
                new += 1
            z[i] = new
            dt[new] += 1
            topic_word[new][w] += 1
            topic_total[new] += 1
        if check_every is not None and (sweep + 1) % check_every == 0:
            _audit_lists(z, token_doc, token_word, doc_topic, topic_word, sweep)

    model = TopicModel(
        k=k,
        alpha=alpha,
        beta=beta,
        topic_word_counts=np.array(topic_word, dtype=np.int64),
        doc_topic_counts=np.array(doc_topic, dtype=np.int64),
        assignments=np.array(z, dtype=np.int64),
        token_doc_ids=np.array(token_doc, dtype=np.int64),
        token_word_ids=np.array(token_word, dtype=np.int64),
        doc_ids=tuple(doc.id for doc in docs),
        vocabulary=vocabulary,
        seed=seed,
        iterations=iterations,
    )
    verify_counts(model)
    return model


def _audit_lists(z, token_doc, token_word, doc_topic, topic_word, sweep):
    n_docs = len(doc_topic)
    k = len(topic_word)
    v = len(topic_word[0])
    dt, tw = rebuild_counts(
        np.array(z), np.array(token_doc), np.array(token_word), n_docs, k, v
    )
    if not (
        np.array_equal(dt, np.array(doc_topic)) and np.array_equal(tw, np.array(topic_word))
    ):
        raise TrainingError(f"count bookkeeping diverged at sweep {sweep}")


def top_terms(model: TopicModel, topic: int, n: int) -> list[str]:
    """Terms of one topic ranked by smoothed count, ties lexicographic.

    n larger than the vocabulary returns every term.
    """
    if not 0 <= topic < model.k:
        raise ValueError(f"topic {topic} out of range for K={model.k}")
    counts = model.topic_word_counts[topic]
    ranked = sorted(
        range(model.vocabulary.size), key=lambda w: (-counts[w], model.vocabulary.terms[w])
    )
    return [model.vocabulary.terms[w] for w in ranked[: max(n, 0)]]


def token_share(model: TopicModel) -> list[float]:
    """Fraction of all tokens each topic holds; sums to 1."""
    counts = np.bincount(model.assignments, minlength=model.k)
    return (counts / model.n_tokens).tolist()


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in log base 2; bounded to [0, 1],
    exactly 1 for disjoint supports."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = 0.5 * (p + q)

    def half(a):
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / m[mask])))

    return 0.5 * half(p) + 0.5 * half(q)


def topic_distance_matrix(model: TopicModel) -> np.ndarray:
    """K x K Jensen-Shannon distances between smoothed topic-word rows.

    Every entry is computed directly, both triangles included, so the
    symmetry of the result is a property of the divergence, not of the
    loop structure.
    """
    phi = model.smoothed_topic_words()
    out = np.zeros((model.k, model.k))
    for i in range(model.k):
        for j in range(model.k):
            if i != j:
                out[i, j] = js_divergence(phi[i], phi[j])
    return out


def mean_pairwise_distance(model: TopicModel) -> float:
    """Mean of the off-diagonal entries of the topic distance matrix."""
    matrix = topic_distance_matrix(model)
    k = model.k
    return float(matrix.sum() / (k * (k - 1)))


def perplexity(model: TopicModel) -> float:
    """Held-in perplexity under the smoothed topic mixture; the floor is 1
    (reached when V = 1, where every prediction is certain)."""
    theta_num = model.doc_topic_counts + model.alpha
    theta = theta_num / theta_num.sum(axis=1, keepdims=True)
    phi = model.smoothed_topic_words()
    probs = np.einsum(
        "nk,nk->n", theta[model.token_doc_ids], phi[:, model.token_word_ids].T
    )
    return float(np.exp(-np.log(probs).mean()))


@dataclass(frozen=True)
class TopicSummary:
    topic: int
    top_terms: tuple[str, ...]
    token_share: float

    def __post_init__(self):
        assert 0.0 <= self.token_share <= 1.0


@dataclass(frozen=True)
class KSweepEntry:
    k: int
    summaries: tuple[TopicSummary, ...]
    mean_distance: float


@dataclass(frozen=True)
class KSweepReport:
    """Per-K topic summaries, ordered by K ascending."""

    entries: tuple[KSweepEntry, ...]

    def __post_init__(self):
        ks = [e.k for e in self.entries]
        assert ks == sorted(ks)

    def to_json(self) -> str:
        payload = {
            "entries": [
                {
                    "k": e.k,
                    "mean_distance": e.mean_distance,
                    "topics": [
                        {
                            "topic": s.topic,
                            "top_terms": list(s.top_terms),
                            "token_share": s.token_share,
                        }
                        for s in e.summaries
                    ],
                }
                for e in self.entries
            ]
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "KSweepReport":
        data = json.loads(text)
        return cls(
            tuple(
                KSweepEntry(
                    k=e["k"],
                    summaries=tuple(
                        TopicSummary(t["topic"], tuple(t["top_terms"]), t["token_share"])
                        for t in e["topics"]
                    ),
                    mean_distance=e["mean_distance"],
                )
                for e in data["entries"]
            )
        )


def summarize(model: TopicModel, top_n: int = 10) -> tuple[TopicSummary, ...]:
    shares = token_share(model)
    return tuple(
        TopicSummary(t, tuple(top_terms(model, t, top_n)), shares[t]) for t in range(model.k)
    )


def sweep_k(
    docs: list[TokenizedDoc],
    vocabulary: WordVocabulary,
    ks: list[int],
    alpha_rule=None,
    beta: float = 0.01,
    iterations: int = 1000,
    seed: int = 42,
    top_n: int = 10,
) -> KSweepReport:
    """Fit one model per K and summarize each.

    Each K runs with seed + K so the fits are independent draws. alpha_rule
    maps K to its alpha; default 50/K. Duplicate K values collapse to one.
    """
    if not ks:
        raise ValueError("no K values to sweep")
    if alpha_rule is None:
        alpha_rule = lambda n: 50.0 / n
    entries = []
    for k in sorted(set(ks)):
        model = fit_lda(
            docs,
            vocabulary,
            k,
            alpha=alpha_rule(k),
            beta=beta,
            iterations=iterations,
            seed=seed + k,
        )
        entries.append(KSweepEntry(k, summarize(model, top_n), mean_pairwise_distance(model)))
    return KSweepReport(tuple(entries))


def _safe_name(raw: str) -> str:
    cleaned = "".join(ch if ch in _NAME_SAFE else "_" for ch in raw.lower())
    return cleaned or "topic"


def export_intent_draft(
    model: TopicModel, docs: list[TokenizedDoc], label_prefix: str = "mined"
) -> str:
    """Render the model as a draft NLU markdown corpus for human review.

    Each document goes to the argmax topic of its doc-topic counts (ties to
    the lowest topic id); topic t is named <prefix>_<t>_<top term>. Topics
    that claimed no document are omitted. Document text is rebuilt from the
    preprocessed tokens, with annotation-grammar characters scrubbed so the
    output always parses back.
    """
    if len(docs) != model.doc_topic_counts.shape[0]:
        raise ValueError("docs do not match the fitted model")
    prefix = _safe_name(label_prefix)
    names = {
        t: f"{prefix}_{t}_{_safe_name(top_terms(model, t, 1)[0])}" for t in range(model.k)
    }
    examples = []
    for row, doc in enumerate(docs):
        topic = int(model.doc_topic_counts[row].argmax())
        words = []
        for w in doc.tokens:
            word = model.vocabulary.terms[w].translate({ord(c): None for c in "[]()"})
            if word:
                words.append(word)
        text = " ".join(words)
        if text:
            examples.append(TrainingExample(text, names[topic], ()))
    return write_nlu_markdown(examples, SynonymTable(), [])
