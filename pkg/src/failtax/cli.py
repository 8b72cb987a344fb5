"""failtax command line: classify, evaluate, aggregate, report, pipeline.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .analytics import aggregate, counts_csv, figure_fixtures, figure_result_set, pair_results
from .atomic import atomic_write_text
from .classifier import (
    ORACLE,
    REMOTE,
    REPLAY,
    BackendConfig,
    Classifier,
    ClassificationFailure,
    DatasetRun,
    ResponseCache,
    load_results,
    write_results,
)
from .errors import AllRecordsFailed, CacheMiss, FailtaxError
from .evaluation import build_confusion, compute_metrics, gold_pairs
from .ingestion import Dataset, load_dataset, validate_dataset
from .prompting import PromptVersion, example_bank
from .reporting import render_markdown_report, write_charts

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("failtax")

BACKEND_FLAGS = {"llm": REMOTE, "oracle": ORACLE, "replay": REPLAY}

RESULTS = "results.jsonl"
FAILURES = "failures.jsonl"
MATRIX = "matrix.csv"
METRICS = "metrics.json"
COUNTS = "counts.csv"
REPORT = "report.md"
CACHE = "cache.jsonl"


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass
class RunConfig:
    subcommand: str
    input: Path | None = None
    results: Path | None = None
    out_dir: Path | None = None
    format: str | None = None
    prompt_version: PromptVersion = PromptVersion.V2
    backend: BackendConfig | None = None
    cache: Path | None = None
    examples: Path | None = None


# --- argument parsing ------------------------------------------------------


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="incident dataset (.jsonl or .csv)")
    p.add_argument("--format", choices=["jsonl", "csv"], help="dataset format (default: from file suffix)")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", help="directory for output files")


def _add_backend(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prompt-version", default="v2", choices=["v0", "v1", "v2", "V0", "V1", "V2"])
    p.add_argument("--backend", default="oracle", choices=sorted(BACKEND_FLAGS))
    p.add_argument("--endpoint", help="base URL of an OpenAI-compatible API (llm backend)")
    p.add_argument("--model", default="gpt-3.5-turbo")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--retry-limit", type=int, default=3)
    p.add_argument("--cache", help="response cache file (default: <out-dir>/cache.jsonl for llm/replay)")
    p.add_argument("--examples", help="JSONL of extra few-shot examples {cause, label}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="failtax", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="TOML file of flag defaults (keys are flag names)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND")

    p = sub.add_parser("classify", help="classify incident causes into failure types")
    _add_input(p)
    _add_out(p)
    _add_backend(p)

    for name, text in (
        ("evaluate", "confusion matrix and metrics against gold labels"),
        ("aggregate", "per-industry failure counts"),
        ("report", "Markdown report and per-industry SVG charts"),
    ):
        p = sub.add_parser(name, help=text)
        _add_input(p)
        p.add_argument("--results", help="results.jsonl written by classify")
        _add_out(p)

    p = sub.add_parser("pipeline", help="classify, evaluate, aggregate and report in one go")
    _add_input(p)
    _add_out(p)
    _add_backend(p)

    p = sub.add_parser("validate", help="check a dataset and print counts per industry")
    _add_input(p)

    p = sub.add_parser("figures", help="render the bundled per-industry figure data")
    _add_out(p)
    return parser


def _load_config(path: str) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"invalid config {path}: {exc}") from None
    return {k.replace("-", "_"): v for k, v in raw.items()}


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        defaults = _load_config(ns.config)
        if "api_key" in defaults or "credential" in defaults:
            raise UsageError("secrets belong in FAILTAX_API_KEY, not in the config file")
        sub = parser._subparsers._group_actions[0].choices.get(ns.subcommand) if ns.subcommand else None
        if sub is not None:
            known = {a.dest for a in sub._actions}
            unknown = sorted(set(defaults) - known)
            if unknown:
                raise UsageError(f"unknown config key(s) for {ns.subcommand}: {', '.join(unknown)}")
            sub.set_defaults(**defaults)
            ns = parser.parse_args(argv)
    if not ns.subcommand:
        raise UsageError("a command is required (classify, evaluate, aggregate, report, pipeline, validate, figures)")
    return ns


def _require(ns: argparse.Namespace, *names: str) -> None:
    missing = ["--" + n.replace("_", "-") for n in names if getattr(ns, n, None) in (None, "")]
    if missing:
        raise UsageError(f"{ns.subcommand}: missing required flag(s) {', '.join(missing)}")


def _existing(path: str, flag: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: no such file {path}")
    return p


def to_run_config(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(ns.subcommand)
    if hasattr(ns, "input"):
        _require(ns, "input")
        cfg.input = _existing(ns.input, "--input")
        cfg.format = ns.format
    if hasattr(ns, "out_dir"):
        _require(ns, "out_dir")
        cfg.out_dir = Path(ns.out_dir)
    if hasattr(ns, "results"):
        _require(ns, "results")
        cfg.results = _existing(ns.results, "--results")
    if hasattr(ns, "backend"):
        kind = BACKEND_FLAGS[ns.backend]
        if kind == REMOTE and not ns.endpoint:
            raise UsageError("--backend llm needs --endpoint")
        try:
            cfg.backend = BackendConfig(
                kind=kind,
                endpoint=ns.endpoint,
                model=ns.model,
                temperature=ns.temperature,
                max_in_flight=ns.max_in_flight,
                retry_limit=ns.retry_limit,
            )
            cfg.prompt_version = PromptVersion.parse(ns.prompt_version)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if ns.cache:
            cfg.cache = Path(ns.cache)
        elif kind != ORACLE:
            cfg.cache = cfg.out_dir / CACHE
        if ns.examples:
            cfg.examples = _existing(ns.examples, "--examples")
    return cfg


# --- stages ------------------------------------------------------------------


def _classify(cfg: RunConfig, ds: Dataset) -> DatasetRun:
    cache = ResponseCache.load(cfg.cache) if cfg.cache else ResponseCache()
    examples = example_bank(cfg.examples)
    try:
        with Classifier(cfg.backend, cache, cfg.prompt_version, examples) as clf:
            run = clf.classify_all(ds.records)
    finally:
        if cfg.cache and cache.dirty:
            cache.save(cfg.cache)
    write_results(run.results, cfg.out_dir / RESULTS)
    failures_path = cfg.out_dir / FAILURES
    if run.failures:
        atomic_write_text(failures_path, "".join(json.dumps(f.to_json()) + "\n" for f in run.failures))
    elif failures_path.exists():
        failures_path.unlink()
    return run


def _report_failures(failures: Sequence[ClassificationFailure]) -> None:
    misses = [f.record_id for f in failures if f.error.startswith(CacheMiss.__name__)]
    if misses:
        print(f"CacheMiss for record(s): {', '.join(misses)}", file=sys.stderr)
    for f in failures:
        if f.record_id not in misses:
            print(f"failed {f.record_id}: {f.error}", file=sys.stderr)


def _evaluate(ds: Dataset, results, out_dir: Path):
    pairs = gold_pairs(ds, results)
    if not pairs:
        return None
    metrics = compute_metrics(build_confusion(pairs))
    atomic_write_text(out_dir / MATRIX, metrics.matrix.to_csv())
    atomic_write_text(out_dir / METRICS, metrics.dumps())
    return metrics


def _aggregate(ds: Dataset, results, out_dir: Path):
    breakdowns = aggregate(pair_results(ds.records, results))
    atomic_write_text(out_dir / COUNTS, counts_csv(breakdowns))
    return breakdowns


def _report(breakdowns, metrics, out_dir: Path, titles=None) -> None:
    atomic_write_text(out_dir / REPORT, render_markdown_report(breakdowns, metrics))
    write_charts(breakdowns, out_dir, titles)


def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except (FailtaxError, OSError) as exc:
        raise StageError(name, exc) from exc


# --- commands ----------------------------------------------------------------


def cmd_classify(cfg: RunConfig) -> int:
    ds = load_dataset(cfg.input, cfg.format)
    try:
        run = _classify(cfg, ds)
    except AllRecordsFailed as exc:
        _report_failures(exc.failures)
        print(f"classified 0, non-canonical 0, failed {len(exc.failures)}")
        return 1
    _report_failures(run.failures)
    print(run.summary())
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    ds = load_dataset(cfg.input, cfg.format)
    metrics = _evaluate(ds, load_results(cfg.results), cfg.out_dir)
    if metrics is None:
        print("no gold-labelled records with results; nothing to evaluate", file=sys.stderr)
        return 1
    print(f"accuracy {metrics.accuracy_display} ({metrics.matrix.trace}/{metrics.total})")
    return 0


def cmd_aggregate(cfg: RunConfig) -> int:
    ds = load_dataset(cfg.input, cfg.format)
    breakdowns = _aggregate(ds, load_results(cfg.results), cfg.out_dir)
    print(f"{len(breakdowns)} industries, {sum(b.total for b in breakdowns)} classified failures")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    ds = load_dataset(cfg.input, cfg.format)
    results = load_results(cfg.results)
    breakdowns = aggregate(pair_results(ds.records, results))
    pairs = gold_pairs(ds, results)
    metrics = compute_metrics(build_confusion(pairs)) if pairs else None
    _report(breakdowns, metrics, cfg.out_dir)
    print(f"wrote {REPORT} and {len(breakdowns)} chart(s) to {cfg.out_dir}")
    return 0


def cmd_pipeline(cfg: RunConfig) -> int:
    ds = _stage("load", load_dataset, cfg.input, cfg.format)
    try:
        run = _stage("classify", _classify, cfg, ds)
    except StageError as exc:
        if isinstance(exc.cause, AllRecordsFailed):
            _report_failures(exc.cause.failures)
        raise
    _report_failures(run.failures)
    for name in (MATRIX, METRICS):
        stale = cfg.out_dir / name
        if stale.exists():
            stale.unlink()
    metrics = _stage("evaluate", _evaluate, ds, run.results, cfg.out_dir)
    breakdowns = _stage("aggregate", _aggregate, ds, run.results, cfg.out_dir)
    _stage("report", _report, breakdowns, metrics, cfg.out_dir)
    print(run.summary())
    if metrics is not None:
        print(f"accuracy {metrics.accuracy_display} ({metrics.matrix.trace}/{metrics.total})")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    report = validate_dataset(load_dataset(cfg.input, cfg.format))
    print(json.dumps(report.to_json(), indent=2, ensure_ascii=False))
    return 0


def cmd_figures(cfg: RunConfig) -> int:
    fixtures = figure_fixtures()
    pairs = [p for fx in fixtures for p in figure_result_set(fx)]
    breakdowns = aggregate(pairs)
    atomic_write_text(cfg.out_dir / COUNTS, counts_csv(breakdowns))
    _report(breakdowns, None, cfg.out_dir, {fx.industry.name: fx.title for fx in fixtures})
    print(f"wrote {len(breakdowns)} chart(s) to {cfg.out_dir}")
    return 0


COMMANDS = {
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "aggregate": cmd_aggregate,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
    "validate": cmd_validate,
    "figures": cmd_figures,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = parse_args(argv)
        cfg = to_run_config(ns)
    except UsageError as exc:
        print(f"failtax: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if ns.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except (FailtaxError, StageError, OSError) as exc:
        print(f"failtax: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
