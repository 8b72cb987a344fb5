import json

import pytest
from hypothesis import given, strategies as st

from failtax.errors import DuplicateId, InvalidGoldLabel, IoFailure, MalformedRecord
from failtax.ingestion import Dataset, IncidentRecord, load_dataset, validate_dataset, write_dataset
from failtax.taxonomy import FailureType, Industry

from .conftest import write_jsonl

HELI = "The faulty computer software in the Chinook helicopter was described as dangerous."


def test_jsonl_record_with_gold(tmp_path):
    path = write_jsonl(
        tmp_path / "d.jsonl",
        [{"id": "a1", "cause": HELI, "industry": "Transportation", "gold_label": "Functionality Bug"}],
    )
    ds = load_dataset(path, "jsonl")
    (rec,) = ds.records
    assert rec.id == "a1"
    assert rec.industry == Industry("Transportation")
    assert rec.gold_label is FailureType.FUNCTIONALITY_BUG
    assert ds.source_path == str(path)


def test_gold_label_is_optional_and_extra_fields_pass_through(tmp_path):
    path = write_jsonl(tmp_path / "d.jsonl", [{"id": "a", "cause": "c", "industry": "Finance", "url": "http://x"}])
    (rec,) = load_dataset(path).records
    assert rec.gold_label is None
    assert rec.extra == {"url": "http://x"}
    assert rec.to_json()["url"] == "http://x"


@pytest.mark.parametrize(
    "row, reason",
    [
        ({"id": "a", "cause": "   ", "industry": "Finance"}, "empty cause"),
        ({"id": "a", "industry": "Finance"}, "missing field 'cause'"),
        ({"cause": "c", "industry": "Finance"}, "missing field 'id'"),
        ({"id": "a", "cause": "c"}, "missing field 'industry'"),
        ({"id": " ", "cause": "c", "industry": "Finance"}, "empty id"),
    ],
)
def test_malformed_records(tmp_path, row, reason):
    path = write_jsonl(tmp_path / "d.jsonl", [{"id": "ok", "cause": "c", "industry": "x"}, row])
    with pytest.raises(MalformedRecord) as err:
        load_dataset(path)
    assert err.value.line_no == 2
    assert err.value.reason == reason


def test_invalid_json_line(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"id": "a", "cause": "c", "industry": "x"}\n{oops\n')
    with pytest.raises(MalformedRecord) as err:
        load_dataset(path)
    assert err.value.line_no == 2


def test_duplicate_id(tmp_path):
    path = write_jsonl(
        tmp_path / "d.jsonl",
        [{"id": "x", "cause": "c", "industry": "Finance"}, {"id": "x", "cause": "d", "industry": "Finance"}],
    )
    with pytest.raises(DuplicateId) as err:
        load_dataset(path)
    assert err.value.record_id == "x"


def test_duplicate_id_in_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("id,cause,industry,gold_label\nx,c,Finance,\nx,d,Finance,\n")
    with pytest.raises(DuplicateId):
        load_dataset(path)


@pytest.mark.parametrize("gold", ["The failure type is Outage", "Denial of Service", "Outage?"])
def test_gold_labels_get_no_substring_rescue(tmp_path, gold):
    path = write_jsonl(tmp_path / "d.jsonl", [{"id": "a", "cause": "c", "industry": "x", "gold_label": gold}])
    with pytest.raises(InvalidGoldLabel) as err:
        load_dataset(path)
    assert err.value.record_id == "a"
    assert err.value.raw == gold


@pytest.mark.parametrize("gold", ["outage", " Outage. ", "ui-ux bug", "NON-SOFTWARE CAUSE"])
def test_gold_labels_accept_exact_variants(tmp_path, gold):
    path = write_jsonl(tmp_path / "d.jsonl", [{"id": "a", "cause": "c", "industry": "x", "gold_label": gold}])
    assert load_dataset(path).records[0].gold_label is not None


def test_missing_file():
    with pytest.raises(IoFailure):
        load_dataset("/nonexistent/data.jsonl")


def test_csv_with_quoted_commas_and_newlines(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(
        'id,cause,industry,gold_label\r\n'
        'a,"Payment API, v2, returned ""null""\nfor refunds",Finance,Integration Issue\r\n'
        'b,plain cause,Government,\r\n',
        encoding="utf-8",
    )
    ds = load_dataset(path)
    assert [r.id for r in ds] == ["a", "b"]
    assert ds.records[0].cause == 'Payment API, v2, returned "null"\nfor refunds'
    assert ds.records[0].gold_label is FailureType.INTEGRATION_ISSUE
    assert ds.records[1].gold_label is None


def test_blank_industry_becomes_unknown(tmp_path):
    path = write_jsonl(tmp_path / "d.jsonl", [{"id": "a", "cause": "c", "industry": "  "}])
    assert load_dataset(path).records[0].industry == Industry("Unknown")


def test_order_preserved(gold90):
    ds = load_dataset(gold90)
    assert [r.id for r in ds] == [f"g-{n:03d}" for n in range(1, 91)]


def test_validate_empty():
    report = validate_dataset(Dataset(()))
    assert (report.total, report.per_industry, report.gold_count) == (0, {}, 0)


def test_validate_counts_per_industry():
    recs = (
        IncidentRecord("1", "c", Industry("Finance")),
        IncidentRecord("2", "c", Industry("Government")),
        IncidentRecord("3", "c", Industry("Finance")),
    )
    report = validate_dataset(Dataset(recs))
    assert report.per_industry == {"Finance": 2, "Government": 1}
    assert report.total == 3


def test_validate_gold90(gold90):
    report = validate_dataset(load_dataset(gold90))
    assert report.total == 90
    assert report.gold_count == 90
    assert sum(report.per_industry.values()) == 90
    assert report.warnings == []


def test_validate_warns_on_inconsistent_spelling_and_partial_gold():
    recs = (
        IncidentRecord("1", "c", Industry("Finance"), FailureType.OUTAGE),
        IncidentRecord("2", "c", Industry("finance")),
    )
    report = validate_dataset(Dataset(recs))
    assert report.per_industry == {"Finance": 2}
    assert any("spelled" in w for w in report.warnings)
    assert any("no gold label" in w for w in report.warnings)


# the csv module cannot write NUL characters
_text = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"), min_size=1)

records_strategy = st.lists(
    st.builds(
        IncidentRecord,
        id=_text.filter(lambda s: s.strip() == s),
        cause=_text.filter(lambda s: s.strip()),
        industry=st.sampled_from(["Finance", "Health care", "Government", "finance"]).map(Industry),
        gold_label=st.none() | st.sampled_from(list(FailureType)),
    ),
    max_size=12,
    unique_by=lambda r: r.id,
)


@given(records_strategy, st.sampled_from(["jsonl", "csv"]))
def test_write_then_load_is_a_fixed_point(tmp_path_factory, records, fmt):
    path = tmp_path_factory.mktemp("rt") / f"d.{fmt}"
    write_dataset(records, path)
    first = load_dataset(path)
    assert list(first.records) == records
    write_dataset(first, path)
    assert load_dataset(path).records == first.records


@given(records_strategy, st.randoms())
def test_validation_totals_ignore_record_order(records, rnd):
    shuffled = list(records)
    rnd.shuffle(shuffled)
    a, b = validate_dataset(Dataset(tuple(records))), validate_dataset(Dataset(tuple(shuffled)))
    assert a.to_json() == b.to_json()
    assert sum(a.per_industry.values()) == a.total
