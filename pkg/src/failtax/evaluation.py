"""Confusion matrices and accuracy / precision / recall against gold labels."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Iterable, Sequence

from .classifier import ClassificationResult
from .errors import EmptyInput, EmptyMatrix
from .ingestion import Dataset
from .taxonomy import FailureType, canonical_order

ORDER = tuple(canonical_order())
_INDEX = {t: i for i, t in enumerate(ORDER)}
N = len(ORDER)

Grid = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Gold-vs-predicted counts; rows are gold labels, columns predictions, both in canonical order."""

    counts: Grid
    total: int

    def __post_init__(self) -> None:
        if len(self.counts) != N or any(len(row) != N for row in self.counts):
            raise ValueError(f"confusion matrix must be {N}x{N}")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("confusion matrix cells must be non-negative")
        if sum(map(sum, self.counts)) != self.total:
            raise ValueError("cell sum does not match total")

    def cell(self, gold: FailureType, predicted: FailureType) -> int:
        return self.counts[_INDEX[gold]][_INDEX[predicted]]

    @property
    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(N))

    def row_sum(self, gold: FailureType) -> int:
        return sum(self.counts[_INDEX[gold]])

    def col_sum(self, predicted: FailureType) -> int:
        j = _INDEX[predicted]
        return sum(row[j] for row in self.counts)

    @property
    def is_diagonal(self) -> bool:
        return all(self.counts[i][j] == 0 for i in range(N) for j in range(N) if i != j)

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gold \\ predicted", *(t.value for t in ORDER)])
        for t, row in zip(ORDER, self.counts):
            w.writerow([t.value, *row])
        return buf.getvalue()


def build_confusion(pairs: Iterable[tuple[FailureType, FailureType]]) -> ConfusionMatrix:
    grid = [[0] * N for _ in range(N)]
    total = 0
    for gold, predicted in pairs:
        grid[_INDEX[gold]][_INDEX[predicted]] += 1
        total += 1
    if total == 0:
        raise EmptyInput()
    return ConfusionMatrix(tuple(map(tuple, grid)), total)


def gold_pairs(
    ds: Dataset, results: Iterable[ClassificationResult]
) -> list[tuple[FailureType, FailureType]]:
    """Pair each gold-labelled record with its prediction, in result order."""
    by_id = ds.by_id()
    pairs = []
    for r in results:
        rec = by_id.get(r.record_id)
        if rec is not None and rec.gold_label is not None:
            pairs.append((rec.gold_label, r.label))
    return pairs


def percent_display(fraction: float) -> str:
    """Whole-number percentage, rounding halves up: 0.7556 -> '76%'."""
    pct = (Decimal(repr(fraction)) * 100).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return f"{pct}%"


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


@dataclass(frozen=True)
class ClassMetrics:
    precision: float | None
    recall: float | None
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_recall: float | None  # mean recall over classes that occur in the gold labels
    per_class: dict[FailureType, ClassMetrics]
    total: int
    matrix: ConfusionMatrix

    @property
    def accuracy_display(self) -> str:
        return percent_display(self.accuracy)

    def to_json(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "accuracy_display": self.accuracy_display,
            "macro_recall": self.macro_recall,
            "total": self.total,
            "correct": self.matrix.trace,
            "per_class": {
                t.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "support": m.support,
                }
                for t, m in self.per_class.items()
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total <= 0:
        raise EmptyMatrix()
    per_class: dict[FailureType, ClassMetrics] = {}
    for t in ORDER:
        tp = cm.cell(t, t)
        predicted, support = cm.col_sum(t), cm.row_sum(t)
        per_class[t] = ClassMetrics(
            precision=tp / predicted if predicted else None,
            recall=tp / support if support else None,
            support=support,
        )
    recalls = [m.recall for m in per_class.values() if m.recall is not None]
    return MetricsReport(
        accuracy=cm.trace / cm.total,
        macro_recall=sum(recalls) / len(recalls) if recalls else None,
        per_class=per_class,
        total=cm.total,
        matrix=cm,
    )


def diff_matrices(a: ConfusionMatrix, b: ConfusionMatrix) -> list[list[int]]:
    """Cell-wise b - a, e.g. to see what a prompt revision moved."""
    if a.total == 0 or b.total == 0:
        raise EmptyMatrix()
    return [[b.counts[i][j] - a.counts[i][j] for j in range(N)] for i in range(N)]


def metrics_table(report: MetricsReport) -> list[list[str]]:
    rows = [["Failure type", "Precision", "Recall", "Support"]]
    for t, m in report.per_class.items():
        rows.append([t.value, _fmt(m.precision), _fmt(m.recall), str(m.support)])
    return rows


def matrix_rows(cm: ConfusionMatrix, labels: Sequence[FailureType] = ORDER) -> list[list[str]]:
    return [[t.value, *(str(c) for c in row)] for t, row in zip(labels, cm.counts)]
