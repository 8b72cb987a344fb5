"""Loading, validating and writing incident datasets (JSONL or CSV)."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .atomic import atomic_write_text
from .errors import DuplicateId, InvalidGoldLabel, IoFailure, MalformedRecord
from .taxonomy import FailureType, Industry, exact_label, industry_or_unknown

CSV_FIELDS = ("id", "cause", "industry", "gold_label")
_KNOWN_KEYS = set(CSV_FIELDS)


@dataclass(frozen=True)
class IncidentRecord:
    id: str
    cause: str
    industry: Industry
    gold_label: FailureType | None = None
    # unknown JSONL fields, carried through untouched
    extra: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def to_json(self) -> dict[str, Any]:
        row: dict[str, Any] = {"id": self.id, "cause": self.cause, "industry": self.industry.name}
        if self.gold_label is not None:
            row["gold_label"] = self.gold_label.value
        for key, value in self.extra.items():
            row.setdefault(key, value)
        return row


@dataclass(frozen=True)
class Dataset:
    records: tuple[IncidentRecord, ...]
    source_path: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise DuplicateId(rec.id)
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[str, IncidentRecord]:
        return {r.id: r for r in self.records}

    @property
    def has_gold(self) -> bool:
        return any(r.gold_label is not None for r in self.records)


def _text(value: Any) -> str:
    if value is None:
        return ""
    return value if isinstance(value, str) else str(value)


def parse_record(row: dict[str, Any], line_no: int) -> IncidentRecord:
    """Build one record from a decoded JSONL object or CSV row."""
    for key in ("id", "cause", "industry"):
        if key not in row or row[key] is None:
            raise MalformedRecord(line_no, f"missing field {key!r}")
    rec_id = _text(row["id"]).strip()
    if not rec_id:
        raise MalformedRecord(line_no, "empty id")
    cause = _text(row["cause"])
    if not cause.strip():
        raise MalformedRecord(line_no, "empty cause")

    gold: FailureType | None = None
    raw_gold = _text(row.get("gold_label"))
    if raw_gold.strip():
        gold = exact_label(raw_gold)
        if gold is None:
            raise InvalidGoldLabel(rec_id, raw_gold)

    extra = {k: v for k, v in row.items() if k not in _KNOWN_KEYS}
    return IncidentRecord(
        id=rec_id,
        cause=cause,
        industry=industry_or_unknown(_text(row["industry"])),
        gold_label=gold,
        extra=extra,
    )


def _iter_jsonl(text: str) -> Iterable[tuple[int, dict[str, Any]]]:
    # only "\n" ends a record; str.splitlines() would also split on U+2028 etc.
    for line_no, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise MalformedRecord(line_no, "expected a JSON object")
        yield line_no, obj


def _iter_csv(text: str) -> Iterable[tuple[int, dict[str, Any]]]:
    reader = csv.DictReader(io.StringIO(text, newline=""))
    missing = [f for f in ("id", "cause", "industry") if f not in (reader.fieldnames or [])]
    if missing:
        raise MalformedRecord(1, f"CSV header lacks column(s) {', '.join(missing)}")
    for row in reader:
        # line_num is the reader's physical line after this row; rows can span lines
        yield reader.line_num, {k: v for k, v in row.items() if k is not None}


def infer_format(path: str | Path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "jsonl"


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Read every record of a JSONL or CSV file, in file order.

    Gold labels must match a display text exactly (after trimming and
    case-folding); prose around a label is rejected rather than rescued.
    """
    fmt = (format or infer_format(path)).lower()
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unsupported dataset format {format!r}")
    try:
        # newline="" keeps carriage returns inside quoted CSV fields intact
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(str(path), str(exc)) from None

    rows = _iter_jsonl(text) if fmt == "jsonl" else _iter_csv(text)
    records: list[IncidentRecord] = []
    seen: set[str] = set()
    for line_no, row in rows:
        rec = parse_record(row, line_no)
        if rec.id in seen:
            raise DuplicateId(rec.id)
        seen.add(rec.id)
        records.append(rec)
    return Dataset(tuple(records), str(path))


def dump_jsonl(records: Iterable[IncidentRecord]) -> str:
    return "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in records)


def dump_csv(records: Iterable[IncidentRecord]) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow([r.id, r.cause, r.industry.name, r.gold_label.value if r.gold_label else ""])
    return buf.getvalue()


def write_dataset(ds: Dataset | Iterable[IncidentRecord], path: str | Path, format: str | None = None) -> None:
    records = ds.records if isinstance(ds, Dataset) else tuple(ds)
    fmt = (format or infer_format(path)).lower()
    atomic_write_text(path, dump_csv(records) if fmt == "csv" else dump_jsonl(records))


@dataclass
class ValidationReport:
    total: int
    per_industry: dict[str, int]
    gold_count: int
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "per_industry": self.per_industry,
            "gold_count": self.gold_count,
            "warnings": self.warnings,
        }


def validate_dataset(ds: Dataset) -> ValidationReport:
    counts: Counter[Industry] = Counter(r.industry for r in ds.records)
    spellings: dict[Industry, set[str]] = {}
    for r in ds.records:
        spellings.setdefault(r.industry, set()).add(r.industry.name)

    # display name: lexicographically smallest spelling, so the report is order-independent
    per_industry = {min(spellings[ind]): n for ind, n in sorted(counts.items(), key=lambda kv: kv[0].key)}
    gold_count = sum(1 for r in ds.records if r.gold_label is not None)

    warnings: list[str] = []
    for ind in sorted(spellings, key=lambda i: i.key):
        if len(spellings[ind]) > 1:
            names = ", ".join(sorted(spellings[ind]))
            warnings.append(f"industry spelled several ways: {names}")
    if 0 < gold_count < len(ds.records):
        warnings.append(f"{len(ds.records) - gold_count} of {len(ds.records)} records have no gold label")
    unknown = counts.get(industry_or_unknown(None), 0)
    if unknown:
        warnings.append(f"{unknown} record(s) grouped under industry Unknown")
    return ValidationReport(len(ds.records), per_industry, gold_count, warnings)
