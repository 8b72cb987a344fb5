"""The closed failure-type taxonomy, the industry vocabulary and label normalization."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering


class FailureType(str, Enum):
    """One of the ten failure types. The value is the canonical display text."""

    DATA_BREACH = "Data Breach"
    FUNCTIONALITY_BUG = "Functionality Bug"
    UI_UX_BUG = "UI/UX Bug"
    REGRESSION_BUG = "Regression Bug"
    OUTAGE = "Outage"
    SECURITY_VULNERABILITY = "Security Vulnerability"
    PERFORMANCE_ISSUE = "Performance Issue"
    INTEGRATION_ISSUE = "Integration Issue"
    NON_SOFTWARE_CAUSE = "Non-Software Cause"
    OTHER = "Other"

    @property
    def display(self) -> str:
        return self.value

    def __str__(self) -> str:
        return self.value


# Declaration order above is the order of the list inside the prompts.
PROMPT_ORDER: tuple[FailureType, ...] = tuple(FailureType)

_FIGURE_ORDER: tuple[FailureType, ...] = (
    FailureType.SECURITY_VULNERABILITY,
    FailureType.FUNCTIONALITY_BUG,
    FailureType.DATA_BREACH,
    FailureType.OUTAGE,
    FailureType.INTEGRATION_ISSUE,
    FailureType.OTHER,
    FailureType.PERFORMANCE_ISSUE,
    FailureType.UI_UX_BUG,
    FailureType.REGRESSION_BUG,
    FailureType.NON_SOFTWARE_CAUSE,
)


def canonical_order() -> list[FailureType]:
    """Failure types in the x-axis order used by every per-industry chart."""
    return list(_FIGURE_ORDER)


def display_text(label: FailureType) -> str:
    return label.value


@total_ordering
@dataclass(frozen=True, eq=False)
class Industry:
    """An industry name. Comparison ignores case and surrounding whitespace."""

    name: str

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name.strip():
            raise ValueError("industry name must be non-empty")
        object.__setattr__(self, "name", self.name.strip())

    @property
    def key(self) -> str:
        return self.name.casefold()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Industry):
            return NotImplemented
        return self.key == other.key

    def __lt__(self, other: "Industry") -> bool:
        return self.key < other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __str__(self) -> str:
        return self.name

    @property
    def slug(self) -> str:
        """File-name form: case-folded, whitespace runs to hyphens."""
        return "-".join(self.key.replace("/", " ").replace("\\", " ").split())


UNKNOWN_INDUSTRY = Industry("Unknown")

KNOWN_INDUSTRIES: tuple[Industry, ...] = tuple(
    Industry(n)
    for n in (
        "Finance",
        "Healthcare",
        "Information",
        "Knowledge",
        "Transportation",
        "Entertainment",
        "Government",
    )
)


def industry_or_unknown(name: str | None) -> Industry:
    if name is None or not str(name).strip():
        return UNKNOWN_INDUSTRY
    return Industry(str(name))


# --- label normalization -------------------------------------------------

MATCH_EXACT = "exact"
MATCH_RESCUED = "rescued"
MATCH_FALLBACK = "fallback"


@dataclass(frozen=True)
class LabelMatch:
    label: FailureType
    how: str  # one of MATCH_EXACT, MATCH_RESCUED, MATCH_FALLBACK

    @property
    def non_canonical(self) -> bool:
        return self.how != MATCH_EXACT


def _label_pattern(label: FailureType) -> str:
    if label is FailureType.UI_UX_BUG:
        return r"ui[/\- ]ux bug"
    return re.escape(label.value.casefold())


_EXACT = {t: re.compile(_label_pattern(t)) for t in FailureType}
# word-bounded so that e.g. "another" never counts as "Other"
_EMBEDDED = {t: re.compile(r"(?<!\w)" + _label_pattern(t) + r"(?!\w)") for t in FailureType}

_TRAILING_PUNCT = ".!"


def _clean(raw: str) -> str:
    text = raw.strip()
    while text and text[-1] in _TRAILING_PUNCT:
        text = text[:-1].rstrip()
    return " ".join(text.split()).casefold()


def exact_label(raw: str) -> FailureType | None:
    """Trim/case-fold match against the display texts; no substring rescue."""
    text = _clean(raw or "")
    for label, pattern in _EXACT.items():
        if pattern.fullmatch(text):
            return label
    return None


def match_label(raw: str) -> LabelMatch:
    """Map free text onto the taxonomy, recording how the match was made.

    Exact (case-insensitive, trimmed) matches come first. Otherwise the text is
    scanned for display texts embedded in it, and a single distinct hit is
    accepted. Anything else falls back to Other.
    """
    label = exact_label(raw)
    if label is not None:
        return LabelMatch(label, MATCH_EXACT)
    text = _clean(raw or "")
    hits = [t for t, pattern in _EMBEDDED.items() if pattern.search(text)]
    if len(hits) == 1:
        return LabelMatch(hits[0], MATCH_RESCUED)
    return LabelMatch(FailureType.OTHER, MATCH_FALLBACK)


def normalize_label(raw: str) -> FailureType:
    return match_label(raw).label
