"""Running incident causes through a backend and normalizing the replies.

Three backends exist:

* ``remote-llm`` talks to an OpenAI-compatible chat-completions endpoint and
  writes every reply into the response cache.
* ``keyword-oracle`` is an offline, rule-based stand-in for the model.
* ``replay`` answers only from the cache populated by earlier remote runs and
  never opens a socket.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import httpx

from .atomic import atomic_write_text
from .errors import (
    AllRecordsFailed,
    BackendUnavailable,
    CacheMiss,
    FailtaxError,
    InvalidCredential,
    IoFailure,
    MalformedRecord,
)
from .ingestion import Dataset, IncidentRecord
from .prompting import FewShotExample, PromptVersion, render_prompt
from .taxonomy import FailureType, exact_label, match_label

log = logging.getLogger(__name__)

REMOTE = "remote-llm"
ORACLE = "keyword-oracle"
REPLAY = "replay"
BACKEND_KINDS = (REMOTE, ORACLE, REPLAY)

API_KEY_ENV = "FAILTAX_API_KEY"
DEFAULT_MODEL = "gpt-3.5-turbo"
BACKOFF_BASE = 1.0
BACKOFF_FACTOR = 2.0


@dataclass(frozen=True)
class BackendConfig:
    kind: str = ORACLE
    endpoint: str | None = None
    model: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_in_flight: int = 4
    retry_limit: int = 3
    credential_env: str = API_KEY_ENV
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be non-negative")
        if self.kind == REMOTE and not self.endpoint:
            raise ValueError("remote backend needs an endpoint")


# --- keyword oracle ------------------------------------------------------

# First matching rule wins, so the more specific failure types come first.
ORACLE_RULES: tuple[tuple[FailureType, tuple[str, ...]], ...] = (
    (FailureType.DATA_BREACH, (
        r"breach(?:es|ed)?", r"leaked data", r"data leak\w*", r"leaked", r"stolen (?:data|records|credentials)",
        r"exposed (?:data|records|personal)",
    )),
    (FailureType.SECURITY_VULNERABILITY, (
        r"vulnerabilit(?:y|ies)", r"exploit\w*", r"ransomware", r"malware", r"hack(?:ed|ers?|ing)?",
        r"cyber ?attacks?", r"phishing", r"zero[- ]day",
    )),
    (FailureType.OUTAGE, (r"outages?", r"downtime", r"went down", r"service disruption", r"offline")),
    (FailureType.REGRESSION_BUG, (
        r"regression", r"after (?:an |the )?update,? broke", r"after (?:an |the )?update", r"update broke",
        r"incorrectly date\w*", r"wrong date", r"date rollover",
    )),
    (FailureType.PERFORMANCE_ISSUE, (r"slow(?:ness|down|ed)?", r"latency", r"performance", r"timeouts?")),
    (FailureType.INTEGRATION_ISSUE, (r"integration", r"third[- ]party api", r"third[- ]party", r"incompatib\w*")),
    (FailureType.UI_UX_BUG, (r"ui", r"ux", r"user interface", r"display(?:ed|s|ing)?", r"screen layout")),
    (FailureType.NON_SOFTWARE_CAUSE, (
        r"not software", r"non[- ]software", r"lack of support", r"lack of(?: [\w']+){1,3} support",
        r"human error", r"hardware failure", r"power failure",
    )),
    (FailureType.FUNCTIONALITY_BUG, (
        r"bugs?", r"malfunction\w*", r"glitch\w*", r"faulty", r"defects?", r"deficienc(?:y|ies)", r"software error",
    )),
)

_ORACLE_PATTERNS = tuple(
    (label, re.compile("|".join(rf"(?<!\w){kw}(?!\w)" for kw in keywords), re.IGNORECASE))
    for label, keywords in ORACLE_RULES
)


def keyword_oracle(cause: str) -> FailureType:
    for label, pattern in _ORACLE_PATTERNS:
        if pattern.search(cause):
            return label
    return FailureType.OTHER


# --- response cache ------------------------------------------------------


def cache_key(kind: str, model: str, temperature: float, version: PromptVersion, body: str) -> str:
    material = json.dumps(
        {
            "backend": kind,
            "model": model,
            "temperature": float(temperature),
            "prompt_version": PromptVersion(version).value,
            "prompt": body,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed store of raw backend replies, safe to share between threads."""

    def __init__(self, entries: dict[str, str] | None = None, path: str | Path | None = None):
        self._entries: dict[str, str] = dict(entries or {})
        self._lock = threading.Lock()
        self.path = Path(path) if path is not None else None
        self.dirty = False

    @classmethod
    def load(cls, path: str | Path) -> "ResponseCache":
        """Open a cache file; a missing file yields an empty cache bound to that path."""
        path = Path(path)
        entries: dict[str, str] = {}
        if path.exists():
            try:
                lines = path.read_text(encoding="utf-8").split("\n")
            except (OSError, UnicodeDecodeError) as exc:
                raise IoFailure(str(path), str(exc)) from None
            for line_no, line in enumerate(lines, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    entries[str(obj["key"])] = str(obj["reply"])
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise MalformedRecord(line_no, f"{path}: bad cache entry") from None
        return cls(entries, path)

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, reply: str) -> None:
        with self._lock:
            if self._entries.get(key) != reply:
                self._entries[key] = reply
                self.dirty = True

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._entries

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def dumps(self) -> str:
        with self._lock:
            items = sorted(self._entries.items())
        return "".join(json.dumps({"key": k, "reply": v}, ensure_ascii=False) + "\n" for k, v in items)

    def save(self, path: str | Path | None = None) -> None:
        target = Path(path) if path is not None else self.path
        if target is None:
            raise ValueError("cache has no path to save to")
        atomic_write_text(target, self.dumps())
        self.dirty = False


# --- remote chat-completions client ---------------------------------------


def _is_retryable_status(status: int) -> bool:
    return status == 429 or status >= 500


class ChatClient:
    """Minimal OpenAI-compatible chat-completions client with retry and backoff."""

    def __init__(
        self,
        config: BackendConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        self._transport = transport
        self._client: httpx.Client | None = None
        self._lock = threading.Lock()

    @property
    def url(self) -> str:
        return self.config.endpoint.rstrip("/") + "/v1/chat/completions"

    def _api_key(self) -> str:
        key = os.environ.get(self.config.credential_env, "").strip()
        if not key:
            raise InvalidCredential(f"environment variable {self.config.credential_env} is not set")
        return key

    def _http(self) -> httpx.Client:
        with self._lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.config.timeout, transport=self._transport)
            return self._client

    def close(self) -> None:
        with self._lock:
            if self._client is not None:
                self._client.close()
                self._client = None

    def request_body(self, prompt: str) -> dict[str, Any]:
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }

    def complete(self, prompt: str) -> str:
        headers = {"Authorization": f"Bearer {self._api_key()}"}
        body = self.request_body(prompt)
        attempts = 1 + self.config.retry_limit
        reason = ""
        for attempt in range(1, attempts + 1):
            try:
                resp = self._http().post(self.url, json=body, headers=headers)
            except httpx.TransportError as exc:
                reason = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code in (401, 403):
                    raise InvalidCredential(f"endpoint rejected the API key (HTTP {resp.status_code})")
                if resp.status_code < 400:
                    return self._reply_text(resp, attempt)
                reason = f"HTTP {resp.status_code}"
                if not _is_retryable_status(resp.status_code):
                    raise BackendUnavailable(attempt, reason)
            if attempt < attempts:
                delay = BACKOFF_BASE * BACKOFF_FACTOR ** (attempt - 1)
                log.warning("chat request failed (%s); retry %d/%d in %.0fs", reason, attempt, attempts - 1, delay)
                self._sleep(delay)
        raise BackendUnavailable(attempts, reason)

    @staticmethod
    def _reply_text(resp: httpx.Response, attempt: int) -> str:
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise BackendUnavailable(attempt, "malformed chat-completions reply") from None
        if not isinstance(content, str):
            raise BackendUnavailable(attempt, "reply content is not text")
        return content


# --- classification ------------------------------------------------------


@dataclass(frozen=True)
class ClassificationResult:
    record_id: str
    raw_reply: str
    label: FailureType
    non_canonical: bool
    prompt_version: PromptVersion
    backend_kind: str
    cached: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "raw_reply": self.raw_reply,
            "label": self.label.value,
            "non_canonical": self.non_canonical,
            "prompt_version": self.prompt_version.value,
            "backend_kind": self.backend_kind,
            "cached": self.cached,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ClassificationResult":
        label = exact_label(str(obj["label"]))
        if label is None:
            raise ValueError(f"result label {obj['label']!r} is not canonical")
        return cls(
            record_id=str(obj["record_id"]),
            raw_reply=str(obj["raw_reply"]),
            label=label,
            non_canonical=bool(obj["non_canonical"]),
            prompt_version=PromptVersion(obj["prompt_version"]),
            backend_kind=str(obj["backend_kind"]),
            cached=bool(obj["cached"]),
        )


@dataclass(frozen=True)
class ClassificationFailure:
    record_id: str
    error: str

    def to_json(self) -> dict[str, Any]:
        return {"record_id": self.record_id, "error": self.error}


@dataclass
class DatasetRun:
    """Per-record outcomes of classify_dataset, in dataset order."""

    entries: list[ClassificationResult | ClassificationFailure] = field(default_factory=list)

    @property
    def results(self) -> list[ClassificationResult]:
        return [e for e in self.entries if isinstance(e, ClassificationResult)]

    @property
    def failures(self) -> list[ClassificationFailure]:
        return [e for e in self.entries if isinstance(e, ClassificationFailure)]

    @property
    def non_canonical_count(self) -> int:
        return sum(1 for r in self.results if r.non_canonical)

    def summary(self) -> str:
        return (
            f"classified {len(self.results)}, non-canonical {self.non_canonical_count}, "
            f"failed {len(self.failures)}"
        )


class Classifier:
    """Binds a backend, a cache and a prompt version; reusable across records.

    ``transport`` and ``sleep`` are passed to the chat client (tests inject a
    mock transport and a no-op sleep).
    """

    def __init__(
        self,
        backend: BackendConfig,
        cache: ResponseCache | None = None,
        version: PromptVersion = PromptVersion.V2,
        examples: Sequence[FewShotExample] | None = None,
        *,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.cache = cache if cache is not None else ResponseCache()
        self.version = PromptVersion(version)
        self.examples = examples
        self._client = ChatClient(backend, transport=transport, sleep=sleep) if backend.kind == REMOTE else None

    def close(self) -> None:
        if self._client is not None:
            self._client.close()

    def __enter__(self) -> "Classifier":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def _key(self, body: str) -> str:
        # replay serves what the remote backend stored
        kind = REMOTE if self.backend.kind == REPLAY else self.backend.kind
        return cache_key(kind, self.backend.model, self.backend.temperature, self.version, body)

    def classify(self, record: IncidentRecord) -> ClassificationResult:
        prompt = render_prompt(self.version, record.cause, self.examples)
        cached = False
        if self.backend.kind == ORACLE:
            raw = keyword_oracle(record.cause).value
        else:
            key = self._key(prompt.body)
            hit = self.cache.get(key)
            if hit is not None:
                raw, cached = hit, True
            elif self.backend.kind == REPLAY:
                raise CacheMiss(record.id)
            else:
                raw = self._client.complete(prompt.body)
                self.cache.put(key, raw)
        match = match_label(raw)
        return ClassificationResult(
            record_id=record.id,
            raw_reply=raw,
            label=match.label,
            non_canonical=match.non_canonical,
            prompt_version=self.version,
            backend_kind=self.backend.kind,
            cached=cached,
        )

    def classify_all(self, records: Iterable[IncidentRecord]) -> DatasetRun:
        records = list(records)

        def one(rec: IncidentRecord) -> ClassificationResult | ClassificationFailure:
            try:
                return self.classify(rec)
            except FailtaxError as exc:
                log.info("record %s failed: %s", rec.id, exc)
                return ClassificationFailure(rec.id, f"{type(exc).__name__}: {exc}")

        workers = min(self.backend.max_in_flight, max(len(records), 1))
        if workers == 1:
            entries = [one(r) for r in records]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                # map() yields in submission order whatever the completion order
                entries = list(pool.map(one, records))
        run = DatasetRun(entries)
        if records and not run.results:
            raise AllRecordsFailed(run.failures)
        return run


def classify_record(
    record: IncidentRecord,
    version: PromptVersion,
    backend: BackendConfig,
    cache: ResponseCache | None = None,
    examples: Sequence[FewShotExample] | None = None,
) -> ClassificationResult:
    with Classifier(backend, cache, version, examples) as clf:
        return clf.classify(record)


def classify_dataset(
    ds: Dataset | Iterable[IncidentRecord],
    version: PromptVersion,
    backend: BackendConfig,
    cache: ResponseCache | None = None,
    examples: Sequence[FewShotExample] | None = None,
    **client_kwargs: Any,
) -> DatasetRun:
    """Classify every record, isolating per-record failures.

    Raises AllRecordsFailed only when the dataset is non-empty and no record
    could be classified.
    """
    records = ds.records if isinstance(ds, Dataset) else list(ds)
    with Classifier(backend, cache, version, examples, **client_kwargs) as clf:
        return clf.classify_all(records)


def dump_results(results: Iterable[ClassificationResult]) -> str:
    return "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in results)


def write_results(results: Iterable[ClassificationResult], path: str | Path) -> None:
    atomic_write_text(path, dump_results(results))


def load_results(path: str | Path) -> list[ClassificationResult]:
    try:
        lines = Path(path).read_text(encoding="utf-8").split("\n")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(str(path), str(exc)) from None
    results = []
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            results.append(ClassificationResult.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(line_no, f"{path}: bad result line ({exc})") from None
    return results
