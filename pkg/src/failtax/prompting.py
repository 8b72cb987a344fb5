"""Versioned classification prompts and the few-shot example bank."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyCause, IoFailure, MalformedRecord, MissingExamples
from .taxonomy import FailureType, exact_label

CAUSE_SLOT = "$cause"
EXAMPLES_SLOT = "$examples"


class PromptVersion(str, Enum):
    V0 = "V0"  # bare instruction
    V1 = "V1"  # instruction plus the closed failure list
    V2 = "V2"  # V1 plus few-shot examples

    @classmethod
    def parse(cls, text: str) -> "PromptVersion":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown prompt version {text!r} (expected v0, v1 or v2)") from None


@dataclass(frozen=True)
class FewShotExample:
    cause: str
    label: FailureType

    def __post_init__(self) -> None:
        if not self.cause.strip():
            raise EmptyCause()
        if not isinstance(self.label, FailureType):
            raise TypeError("few-shot label must be a FailureType")


@dataclass(frozen=True)
class RenderedPrompt:
    version: PromptVersion
    body: str
    cause_offset: int  # byte offset of the cause within body.encode("utf-8")

    @property
    def cause(self) -> str:
        return self.body.encode("utf-8")[self.cause_offset :].decode("utf-8")


@lru_cache(maxsize=None)
def load_template(version: PromptVersion) -> str:
    text = resources.files("failtax").joinpath("templates", f"{version.value.lower()}.txt").read_text("utf-8")
    # files end with a newline; the rendered prompt ends with the cause itself
    text = text[:-1] if text.endswith("\n") else text
    if text.count(CAUSE_SLOT) != 1 or not text.endswith(CAUSE_SLOT):
        raise ValueError(f"template {version.value} must end with a single {CAUSE_SLOT} slot")
    return text


def _parse_examples(lines: Iterable[str], source: str) -> list[FewShotExample]:
    bank = []
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            cause, raw_label = obj["cause"], obj["label"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise MalformedRecord(line_no, f"{source}: expected {{\"cause\": ..., \"label\": ...}}") from None
        label = exact_label(str(raw_label))
        if label is None:
            raise MalformedRecord(line_no, f"{source}: {raw_label!r} is not a canonical failure type")
        if not str(cause).strip():
            raise MalformedRecord(line_no, f"{source}: empty cause")
        bank.append(FewShotExample(str(cause), label))
    return bank


@lru_cache(maxsize=None)
def _bundled() -> tuple[FewShotExample, ...]:
    text = resources.files("failtax").joinpath("data", "fewshot.jsonl").read_text("utf-8")
    return tuple(_parse_examples(text.split("\n"), "fewshot.jsonl"))


def bundled_example_bank() -> list[FewShotExample]:
    """The three labelled examples shipped with the package, in prompt order."""
    return list(_bundled())


def load_example_bank(path: str | Path) -> list[FewShotExample]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(str(path), str(exc)) from None
    return _parse_examples(text.split("\n"), str(path))


def example_bank(extension: str | Path | None = None) -> list[FewShotExample]:
    """Bundled examples followed by any examples from an extension file."""
    bank = bundled_example_bank()
    if extension is not None:
        bank.extend(load_example_bank(extension))
    return bank


def render_examples(examples: Sequence[FewShotExample]) -> str:
    return "\n\n".join(f"Cause: {ex.cause}\n{ex.label.value}" for ex in examples)


def render_prompt(
    version: PromptVersion,
    cause: str,
    examples: Sequence[FewShotExample] | None = None,
) -> RenderedPrompt:
    """Instantiate the template for one cause.

    ``examples`` only matters for V2, where None means the bundled bank.
    """
    if not cause or not cause.strip():
        raise EmptyCause()
    version = PromptVersion(version)
    prefix = load_template(version)[: -len(CAUSE_SLOT)]
    if version is PromptVersion.V2:
        if examples is None:
            examples = bundled_example_bank()
        if not examples:
            raise MissingExamples()
        prefix = prefix.replace(EXAMPLES_SLOT, render_examples(examples))
    return RenderedPrompt(version, prefix + cause, len(prefix.encode("utf-8")))
