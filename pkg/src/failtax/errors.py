"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class FailtaxError(Exception):
    """Base class for all errors raised by failtax."""


# ingestion


class MalformedRecord(FailtaxError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class DuplicateId(FailtaxError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"duplicate record id {record_id!r}")


class InvalidGoldLabel(FailtaxError):
    def __init__(self, record_id: str, raw: str):
        self.record_id = record_id
        self.raw = raw
        super().__init__(f"record {record_id!r}: gold label {raw!r} is not a canonical failure type")


class IoFailure(FailtaxError):
    def __init__(self, path: str, reason: str = ""):
        self.path = str(path)
        super().__init__(f"cannot read {self.path}" + (f": {reason}" if reason else ""))


# prompting


class EmptyCause(FailtaxError):
    def __init__(self) -> None:
        super().__init__("cause text is empty")


class MissingExamples(FailtaxError):
    def __init__(self) -> None:
        super().__init__("few-shot prompt needs at least one example")


# classifier


class BackendUnavailable(FailtaxError):
    def __init__(self, attempts: int, reason: str):
        self.attempts = attempts
        self.reason = reason
        super().__init__(f"backend unavailable after {attempts} attempt(s): {reason}")


class CacheMiss(FailtaxError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"no cached reply for record {record_id!r}")


class InvalidCredential(FailtaxError):
    pass


class AllRecordsFailed(FailtaxError):
    """Raised by classify_dataset when not a single record could be classified."""

    def __init__(self, failures: list):
        self.failures = failures
        super().__init__(f"all {len(failures)} record(s) failed to classify")


# evaluation


class EmptyInput(FailtaxError):
    def __init__(self) -> None:
        super().__init__("no (gold, predicted) pairs to evaluate")


class EmptyMatrix(FailtaxError):
    def __init__(self) -> None:
        super().__init__("confusion matrix has no entries")


# analytics


class MismatchedPair(FailtaxError):
    def __init__(self, record_id: str, result_id: str | None = None):
        self.record_id = record_id
        msg = f"result does not belong to record {record_id!r}"
        if result_id is not None:
            msg += f" (got {result_id!r})"
        super().__init__(msg)


class EmptyBreakdown(FailtaxError):
    def __init__(self, industry: str):
        self.industry = industry
        super().__init__(f"industry {industry!r} has no classified failures")
