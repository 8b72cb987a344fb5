"""Per-industry failure-type counts."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

from .classifier import ClassificationResult
from .errors import EmptyBreakdown, MismatchedPair
from .ingestion import IncidentRecord
from .prompting import PromptVersion
from .taxonomy import FailureType, Industry, canonical_order

ORDER = tuple(canonical_order())


@dataclass(frozen=True)
class IndustryBreakdown:
    industry: Industry
    counts: dict[FailureType, int]
    total: int

    def __post_init__(self) -> None:
        if set(self.counts) != set(FailureType):
            raise ValueError("breakdown must carry all ten failure types")
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be non-negative")
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts do not sum to total")

    @classmethod
    def from_counts(cls, industry: Industry | str, counts: dict[FailureType, int]) -> "IndustryBreakdown":
        if isinstance(industry, str):
            industry = Industry(industry)
        full = {t: int(counts.get(t, 0)) for t in ORDER}
        return cls(industry, full, sum(full.values()))

    def values(self) -> list[int]:
        """Counts in canonical (chart) order."""
        return [self.counts[t] for t in ORDER]


BreakdownSet = list[IndustryBreakdown]


def _ordered(breakdowns: Iterable[IndustryBreakdown]) -> BreakdownSet:
    return sorted(breakdowns, key=lambda b: (-b.total, b.industry.key))


def aggregate(pairs: Iterable[tuple[IncidentRecord, ClassificationResult]]) -> BreakdownSet:
    """Count predicted failure types per industry.

    Industries compare case-insensitively; the breakdown is labelled with the
    alphabetically first spelling seen so the result does not depend on input order.
    """
    counters: dict[Industry, Counter[FailureType]] = {}
    spellings: dict[Industry, str] = {}
    for record, result in pairs:
        if result.record_id != record.id:
            raise MismatchedPair(record.id, result.record_id)
        counters.setdefault(record.industry, Counter())[result.label] += 1
        name = record.industry.name
        spellings[record.industry] = min(spellings.get(record.industry, name), name)
    return _ordered(
        IndustryBreakdown.from_counts(Industry(spellings[ind]), dict(counter)) for ind, counter in counters.items()
    )


def pair_results(
    records: Iterable[IncidentRecord], results: Iterable[ClassificationResult]
) -> list[tuple[IncidentRecord, ClassificationResult]]:
    """Join records to results by id; records without a result (failed runs) are skipped."""
    by_id: dict[str, ClassificationResult] = {}
    for r in results:
        by_id[r.record_id] = r
    known = set()
    pairs = []
    for rec in records:
        known.add(rec.id)
        if rec.id in by_id:
            pairs.append((rec, by_id[rec.id]))
    stray = sorted(set(by_id) - known)
    if stray:
        raise MismatchedPair(stray[0])
    return pairs


def dominant_failure(b: IndustryBreakdown) -> FailureType:
    """Most frequent failure type; a tie goes to the type that comes first on the chart axis."""
    if b.total <= 0:
        raise EmptyBreakdown(b.industry.name)
    return max(ORDER, key=lambda t: (b.counts[t], -ORDER.index(t)))


def counts_csv(breakdowns: Sequence[IndustryBreakdown]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["industry", *(t.value for t in ORDER), "total"])
    for b in breakdowns:
        w.writerow([b.industry.name, *b.values(), b.total])
    return buf.getvalue()


def read_counts_csv(text: str) -> BreakdownSet:
    reader = csv.DictReader(io.StringIO(text, newline=""))
    out = []
    for row in reader:
        counts = {t: int(row[t.value]) for t in ORDER}
        b = IndustryBreakdown.from_counts(row["industry"], counts)
        if b.total != int(row["total"]):
            raise ValueError(f"counts.csv: total mismatch for {row['industry']!r}")
        out.append(b)
    return _ordered(out)


# --- bundled per-industry figure data --------------------------------------


@dataclass(frozen=True)
class FigureFixture:
    industry: Industry
    title: str
    counts: dict[FailureType, int]


@lru_cache(maxsize=None)
def _figures() -> tuple[FigureFixture, ...]:
    raw = json.loads(resources.files("failtax").joinpath("data", "figures.json").read_text("utf-8"))
    out = []
    for entry in raw["industries"]:
        counts = {FailureType(k): int(v) for k, v in entry["counts"].items()}
        out.append(FigureFixture(Industry(entry["industry"]), entry["title"], counts))
    return tuple(out)


def figure_fixtures() -> list[FigureFixture]:
    """Published per-industry bar heights, one entry per chart."""
    return list(_figures())


def figure_result_set(fixture: FigureFixture) -> list[tuple[IncidentRecord, ClassificationResult]]:
    """Synthetic (record, result) pairs whose aggregation reproduces one chart.

    The underlying articles were never published, so the records carry
    placeholder causes; only the industry and predicted label matter here.
    """
    slug = fixture.industry.slug
    pairs = []
    n = 0
    for label in ORDER:
        for _ in range(fixture.counts.get(label, 0)):
            n += 1
            rid = f"{slug}-{n:04d}"
            rec = IncidentRecord(rid, f"Placeholder incident {rid}", fixture.industry)
            res = ClassificationResult(rid, label.value, label, False, PromptVersion.V2, "fixture", False)
            pairs.append((rec, res))
    return pairs
