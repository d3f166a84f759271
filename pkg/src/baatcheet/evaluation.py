"""Evaluation surface: confusion matrix, P/R/F1, confidence histogram,
and end-to-end conversation tests.

Conventions, applied everywhere: precision, recall and F1 are 0 when
their denominator is 0; classes with zero gold support are excluded from
macro averages; the confidence histogram uses 20 equal bins over [0,1]
with 1.0 landing in the last bin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from .corpus import Story, TrainingExample
from .nlu import IntentModel, rank_intents


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with gold labels on rows and predicted labels on columns."""

    labels: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        assert self.counts.shape == (n, n)
        assert (self.counts >= 0).all()

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @classmethod
    def from_pairs(cls, labels: tuple[str, ...], pairs: list[tuple[str, str]]) -> "ConfusionMatrix":
        index = {name: i for i, name in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for gold, predicted in pairs:
            counts[index[gold], index[predicted]] += 1
        return cls(labels, counts)


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


def metrics_from_matrix(matrix: ConfusionMatrix) -> list[ClassMetrics]:
    rows = matrix.row_sums()
    cols = matrix.col_sums()
    out = []
    for i, label in enumerate(matrix.labels):
        tp = float(matrix.counts[i, i])
        precision = tp / cols[i] if cols[i] > 0 else 0.0
        recall = tp / rows[i] if rows[i] > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out.append(ClassMetrics(label, precision, recall, f1, int(rows[i])))
    return out


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


@dataclass(frozen=True)
class EvaluationReport:
    matrix: ConfusionMatrix
    per_class: tuple[ClassMetrics, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float
    confidence_histogram: tuple[int, ...]
    mean_winning_confidence: float

    def __post_init__(self):
        assert sum(self.confidence_histogram) == self.matrix.total


def histogram(confidences: list[float], bins: int = 20) -> list[int]:
    """Equal-width bin counts over [0,1]; 1.0 goes to the last bin."""
    counts = [0] * bins
    for c in confidences:
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"confidence {c} outside [0,1]")
        counts[min(int(c * bins), bins - 1)] += 1
    return counts


def summarize_matrix(
    matrix: ConfusionMatrix, confidences: list[float]
) -> EvaluationReport:
    per_class = metrics_from_matrix(matrix)
    with_support = [m for m in per_class if m.support > 0]
    total = matrix.total
    weight = lambda m: m.support / total if total else 0.0
    return EvaluationReport(
        matrix=matrix,
        per_class=tuple(per_class),
        macro_precision=_mean([m.precision for m in with_support]),
        macro_recall=_mean([m.recall for m in with_support]),
        macro_f1=_mean([m.f1 for m in with_support]),
        weighted_precision=sum(m.precision * weight(m) for m in per_class),
        weighted_recall=sum(m.recall * weight(m) for m in per_class),
        weighted_f1=sum(m.f1 * weight(m) for m in per_class),
        accuracy=float(np.trace(matrix.counts)) / total if total else 0.0,
        confidence_histogram=tuple(histogram(confidences)),
        mean_winning_confidence=_mean(confidences),
    )


def evaluate_intents(model: IntentModel, examples: list[TrainingExample]) -> EvaluationReport:
    """Parse every example once and score predictions against gold labels."""
    known = set(model.labels)
    for ex in examples:
        if ex.intent not in known:
            raise ValueError(f"gold label {ex.intent!r} unknown to the model")
    pairs: list[tuple[str, str]] = []
    confidences: list[float] = []
    for ex in examples:
        ranking = rank_intents(model, ex.text)
        pairs.append((ex.intent, ranking[0][0]))
        confidences.append(ranking[0][1])
    matrix = ConfusionMatrix.from_pairs(model.labels, pairs)
    return summarize_matrix(matrix, confidences)


@dataclass(frozen=True)
class Divergence:
    step: int
    expected: str
    actual: str


@dataclass(frozen=True)
class ConversationTestResult:
    name: str
    passed: bool
    divergence: Optional[Divergence] = None

    def __post_init__(self):
        assert self.passed == (self.divergence is None)


class RespondsToIntents(Protocol):
    def respond_to_intent(self, conversation_id: str, intent: str) -> list[str]: ...


def run_conversation_tests(
    tests: list[Story], engine: RespondsToIntents
) -> list[ConversationTestResult]:
    """Replay each test conversation and compare chosen actions stepwise.

    Each test runs in its own conversation. The first mismatch is reported
    with the expected and actual action; a sequence ending early on either
    side diverges against "action_listen".
    """
    results = []
    for position, test in enumerate(tests):
        conversation_id = f"__test_{position}_{test.name}"
        divergence = None
        step_no = 0
        for step in test.steps:
            actual = engine.respond_to_intent(conversation_id, step.user_intent)
            expected = list(step.actions)
            for i in range(max(len(expected), len(actual))):
                want = expected[i] if i < len(expected) else "action_listen"
                got = actual[i] if i < len(actual) else "action_listen"
                if want != got:
                    divergence = Divergence(step_no, want, got)
                    break
            if divergence is not None:
                break
            step_no += 1
        results.append(ConversationTestResult(test.name, divergence is None, divergence))
    return results


def _round4(value: float) -> float:
    return round(value, 4)


def render_report(report: EvaluationReport) -> tuple[str, str]:
    """Render (machine-readable JSON, aligned plain-text matrix).

    Float fields carry 4 decimal places in both forms; output is
    byte-stable for a given report.
    """
    payload = {
        "labels": list(report.matrix.labels),
        "matrix": report.matrix.counts.tolist(),
        "per_class": [
            {
                "label": m.label,
                "precision": _round4(m.precision),
                "recall": _round4(m.recall),
                "f1": _round4(m.f1),
                "support": m.support,
            }
            for m in report.per_class
        ],
        "macro": {
            "precision": _round4(report.macro_precision),
            "recall": _round4(report.macro_recall),
            "f1": _round4(report.macro_f1),
        },
        "weighted": {
            "precision": _round4(report.weighted_precision),
            "recall": _round4(report.weighted_recall),
            "f1": _round4(report.weighted_f1),
        },
        "accuracy": _round4(report.accuracy),
        "mean_winning_confidence": _round4(report.mean_winning_confidence),
        "confidence_histogram": list(report.confidence_histogram),
    }
    json_text = json.dumps(payload, indent=2, sort_keys=True)

    labels = report.matrix.labels
    counts = report.matrix.counts
    corner = "gold\\pred"
    width = max([len(corner)] + [len(l) for l in labels] + [len(str(int(counts.max() if counts.size else 0)))])
    fmt = f"{{:>{width}}}"
    lines = [" ".join(fmt.format(s) for s in (corner, *labels))]
    for i, label in enumerate(labels):
        lines.append(" ".join(fmt.format(s) for s in (label, *(str(int(c)) for c in counts[i]))))
    lines.append("")
    lines.append(
        f"accuracy {report.accuracy:.4f}  macro-F1 {report.macro_f1:.4f}  "
        f"weighted-F1 {report.weighted_f1:.4f}  mean-confidence {report.mean_winning_confidence:.4f}"
    )
    return json_text, "\n".join(lines) + "\n"
