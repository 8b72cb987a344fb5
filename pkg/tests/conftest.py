import json
import socket
from pathlib import Path

import httpx
import pytest

from failtax.classifier import keyword_oracle

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


class NetworkDisabled(RuntimeError):
    pass


@pytest.fixture
def no_network(monkeypatch):
    """Make any attempt to resolve or connect raise."""

    def refuse(*args, **kwargs):
        raise NetworkDisabled("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(socket, "getaddrinfo", refuse)


@pytest.fixture
def gold90():
    return DATA / "gold90.jsonl"


@pytest.fixture
def records50():
    return DATA / "records50.jsonl"


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


def last_cause(prompt: str) -> str:
    return prompt.rsplit("Cause: ", 1)[1]


class FakeChatServer:
    """httpx transport answering like a chat-completions endpoint.

    Replies with the keyword oracle's label for the prompt's target cause,
    optionally wrapped in prose.
    """

    def __init__(self, wrap: bool = False, failures: list[int] | None = None):
        self.wrap = wrap
        self.requests: list[httpx.Request] = []
        self.failures = list(failures or [])  # status codes to return before succeeding

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        if self.failures:
            return httpx.Response(self.failures.pop(0), json={"error": "try later"})
        body = json.loads(request.content)
        label = keyword_oracle(last_cause(body["messages"][0]["content"])).value
        content = f"The failure type is: {label}" if self.wrap else label
        return httpx.Response(
            200,
            json={"id": "x", "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]},
        )

    @property
    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self)


# --- acceptance report ---------------------------------------------------------

_criteria: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    key = f"{number}"
    if report.when == "setup" and report.skipped:
        _criteria[key] = ("SKIP", title)
    elif report.when == "call":
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _criteria[key] = (status, title)
    elif report.failed:
        _criteria[key] = ("FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=int):
        status, title = _criteria[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {title}")
