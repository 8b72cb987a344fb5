import functools
import json
import os

import pytest

from failtax import cli
from failtax.atomic import atomic_write_text
from failtax.classifier import Classifier

from .conftest import FakeChatServer, write_jsonl

THREE = [
    {"id": "a", "cause": "Downtime of the booking site.", "industry": "Transportation"},
    {"id": "b", "cause": "A bug doubled fares.", "industry": "Transportation"},
    {"id": "c", "cause": "A breach leaked card numbers.", "industry": "Finance"},
]


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def three(tmp_path):
    return write_jsonl(tmp_path / "three.jsonl", THREE)


@pytest.fixture
def fake_llm(monkeypatch):
    server = FakeChatServer()
    monkeypatch.setenv("FAILTAX_API_KEY", "sk-test")
    monkeypatch.setattr(cli, "Classifier", functools.partial(Classifier, transport=server.transport))
    return server


def test_classify_with_oracle(three, tmp_path, capsys, no_network):
    out = tmp_path / "out"
    assert cli.main(["classify", "--input", str(three), "--out-dir", str(out), "--backend", "oracle"]) == 0
    lines = (out / "results.jsonl").read_text().splitlines()
    assert [json.loads(x)["record_id"] for x in lines] == ["a", "b", "c"]
    assert [json.loads(x)["label"] for x in lines] == ["Outage", "Functionality Bug", "Data Breach"]
    assert "classified 3" in capsys.readouterr().out
    assert not (out / "cache.jsonl").exists()


def test_classify_gold90(gold90, tmp_path, capsys):
    assert cli.main(["classify", "--input", str(gold90), "--out-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("classified 90")


def test_replay_with_cold_cache(three, tmp_path, capsys, no_network):
    code = cli.main(["classify", "--input", str(three), "--out-dir", str(tmp_path), "--backend", "replay"])
    assert code == 1
    err = capsys.readouterr().err
    assert "CacheMiss" in err and "a, b, c" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["classify", "--out-dir", "x"],
        ["classify", "--input", "three.jsonl"],
        ["classify", "--input", "three.jsonl", "--out-dir", "x", "--backend", "llm"],
        ["classify", "--input", "three.jsonl", "--out-dir", "x", "--backend", "gpt"],
        ["classify", "--input", "three.jsonl", "--out-dir", "x", "--temperature", "3"],
        ["classify", "--input", "missing.jsonl", "--out-dir", "x"],
        ["evaluate", "--input", "three.jsonl", "--out-dir", "x"],
        [],
    ],
)
def test_usage_errors_exit_2(argv, three, monkeypatch, capsys):
    monkeypatch.chdir(three.parent)
    assert cli.main(argv) == 2
    assert capsys.readouterr().err


def test_help_exits_0(capsys):
    assert cli.main(["--help"]) == 0
    assert "pipeline" in capsys.readouterr().out


def test_runtime_error_exits_1(tmp_path, capsys):
    bad = write_jsonl(tmp_path / "bad.jsonl", [{"id": "a", "cause": " ", "industry": "x"}])
    assert cli.main(["classify", "--input", str(bad), "--out-dir", str(tmp_path)]) == 1
    assert "empty cause" in capsys.readouterr().err


def test_pipeline_with_gold(gold90, tmp_path, capsys, no_network):
    out = tmp_path / "out"
    assert cli.main(["pipeline", "--input", str(gold90), "--out-dir", str(out)]) == 0
    files = set(tree(out))
    assert {"results.jsonl", "matrix.csv", "metrics.json", "counts.csv", "report.md"} <= files
    assert {f for f in files if f.endswith(".svg")}
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["total"] == 90
    assert f"Overall accuracy: {metrics['accuracy_display']}" in (out / "report.md").read_text()
    assert "accuracy" in capsys.readouterr().out


def test_pipeline_without_gold(records50, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["pipeline", "--input", str(records50), "--out-dir", str(out)]) == 0
    files = set(tree(out))
    assert "matrix.csv" not in files and "metrics.json" not in files
    assert {"results.jsonl", "counts.csv", "report.md"} <= files


def test_pipeline_rerun_is_byte_identical(gold90, tmp_path):
    out = tmp_path / "out"
    argv = ["pipeline", "--input", str(gold90), "--out-dir", str(out)]
    assert cli.main(argv) == 0
    first = tree(out)
    assert cli.main(argv) == 0
    assert tree(out) == first


def test_llm_then_replay_offline(gold90, tmp_path, fake_llm, monkeypatch):
    out = tmp_path / "out"
    llm = ["pipeline", "--input", str(gold90), "--out-dir", str(out), "--backend", "llm",
           "--endpoint", "https://llm.example.test", "--max-in-flight", "8"]
    assert cli.main(llm) == 0
    assert len(fake_llm.requests) == 90
    cache = (out / "cache.jsonl").read_text().splitlines()
    assert len(cache) == len({json.loads(x)["key"] for x in cache})

    # warm rerun: no new requests, identical tree
    assert cli.main(llm) == 0
    warm = tree(out)
    assert cli.main(llm) == 0
    assert tree(out) == warm
    assert len(fake_llm.requests) == 90

    # replay from the same cache with sockets disabled
    monkeypatch.setattr("socket.socket.connect", lambda *a, **k: (_ for _ in ()).throw(RuntimeError("net")))
    replay_out = tmp_path / "replay"
    argv = ["pipeline", "--input", str(gold90), "--out-dir", str(replay_out), "--backend", "replay",
            "--cache", str(out / "cache.jsonl")]
    assert cli.main(argv) == 0
    assert (replay_out / "counts.csv").read_bytes() == (out / "counts.csv").read_bytes()


def test_step_by_step_commands(gold90, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["classify", "--input", str(gold90), "--out-dir", str(out), "--prompt-version", "v1"]) == 0
    results = out / "results.jsonl"
    assert json.loads(results.read_text().splitlines()[0])["prompt_version"] == "V1"
    common = ["--input", str(gold90), "--results", str(results), "--out-dir", str(out)]
    assert cli.main(["evaluate", *common]) == 0
    assert cli.main(["aggregate", *common]) == 0
    assert cli.main(["report", *common]) == 0
    for name in ("matrix.csv", "metrics.json", "counts.csv", "report.md"):
        assert (out / name).exists()


def test_evaluate_without_gold(records50, tmp_path):
    assert cli.main(["classify", "--input", str(records50), "--out-dir", str(tmp_path)]) == 0
    argv = ["evaluate", "--input", str(records50), "--results", str(tmp_path / "results.jsonl"), "--out-dir", str(tmp_path)]
    assert cli.main(argv) == 1


def test_config_file_supplies_defaults(three, tmp_path):
    out = tmp_path / "cfg-out"
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'input = "{three}"\nout-dir = "{out}"\nprompt_version = "v0"\nbackend = "oracle"\n')
    assert cli.main(["--config", str(cfg), "classify"]) == 0
    assert json.loads((out / "results.jsonl").read_text().splitlines()[0])["prompt_version"] == "V0"
    # explicit flags beat the file
    assert cli.main(["--config", str(cfg), "classify", "--prompt-version", "v1"]) == 0
    assert json.loads((out / "results.jsonl").read_text().splitlines()[0])["prompt_version"] == "V1"


def test_config_file_rejects_secrets_and_unknown_keys(three, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('api_key = "sk-123"\n')
    assert cli.main(["--config", str(cfg), "classify"]) == 2
    cfg.write_text('colour = "blue"\n')
    assert cli.main(["--config", str(cfg), "classify"]) == 2


def test_examples_extension(three, tmp_path, fake_llm):
    ext = write_jsonl(tmp_path / "more.jsonl", [{"cause": "Kiosk screens showed garbled text.", "label": "UI/UX Bug"}])
    argv = ["classify", "--input", str(three), "--out-dir", str(tmp_path / "o"), "--backend", "llm",
            "--endpoint", "https://llm.example.test", "--examples", str(ext)]
    assert cli.main(argv) == 0
    prompt = json.loads(fake_llm.requests[0].content)["messages"][0]["content"]
    assert "Cause: Kiosk screens showed garbled text.\nUI/UX Bug" in prompt


def test_figures_command(tmp_path):
    assert cli.main(["figures", "--out-dir", str(tmp_path)]) == 0
    assert "In Government Sector" in (tmp_path / "government.svg").read_text()
    assert len(list(tmp_path.glob("*.svg"))) == 7


def test_validate_command(gold90, capsys):
    assert cli.main(["validate", "--input", str(gold90)]) == 0
    assert json.loads(capsys.readouterr().out)["gold_count"] == 90


def test_atomic_write_leaves_old_file_on_crash(tmp_path, monkeypatch):
    target = tmp_path / "report.md"
    target.write_text("old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write_text(target, "new content")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["report.md"]
