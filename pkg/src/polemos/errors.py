"""Exception taxonomy for the pipeline."""
from __future__ import annotations


class PolemosError(Exception):
    """Base class for pipeline errors."""


class StorageError(PolemosError):
    """Corpus storage I/O or validation failure; batch writes abort whole."""


class QuotaExceeded(PolemosError):
    """API budget cannot cover the next request.

    Carries whatever partial results were gathered before the budget ran out.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


class TransientFailure(PolemosError):
    """Transport error or 5xx that survived all retries."""


class CommentsDisabled(PolemosError):
    """The video rejects comment listing; recorded, not fatal to a run."""


class ApiError(PolemosError):
    """Non-retriable API response (4xx other than quota/disabled)."""


class InsufficientCorpus(PolemosError):
    """Requested sample is larger than the cleaned corpus."""


class NotInSample(PolemosError):
    """Label submitted for a comment outside the annotation sample."""


class InvalidLabel(PolemosError):
    """Label code outside the 0..6 schema."""


class IllegalTransition(PolemosError):
    """Stage change not allowed by the MATTER+PD graph."""


class OutOfWindow(PolemosError):
    """Timestamp earlier than the binning anchor."""


class UndefinedPercent(PolemosError):
    """Percent difference against a zero base."""


class RemoteTimeout(PolemosError):
    """Inference service did not answer in time."""


class RemoteFailure(PolemosError):
    """Inference service answered non-2xx."""


class ProtocolError(PolemosError):
    """Inference response violates the wire contract."""

    def __init__(self, message: str, payload_excerpt: str = ""):
        super().__init__(message)
        self.payload_excerpt = payload_excerpt


class CoverageError(PolemosError):
    """Predictions do not cover the corpus."""

    def __init__(self, message: str, missing_ids=None):
        super().__init__(message)
        self.missing_ids = list(missing_ids or [])


class StageError(PolemosError):
    """A subcommand ran before its predecessor artifact exists."""


class GateFailure(PolemosError):
    """Holdout accuracy below the promotion gate."""
