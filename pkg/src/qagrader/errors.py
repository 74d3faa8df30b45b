"""Exception hierarchy shared across the grading pipeline."""


class QAGraderError(Exception):
    """Base class for all package errors."""


class ValidationError(QAGraderError):
    """A value violates a domain invariant (wrong type, range, or reference)."""


class IngestError(QAGraderError):
    """A document could not be loaded; the message names the offending field."""


class ConflictError(QAGraderError):
    """An operation conflicts with current state (e.g. re-approving an item)."""


class VersionConflictError(ConflictError):
    """Optimistic-concurrency check failed: the caller's version is stale."""


class NotFoundError(QAGraderError):
    """A referenced document, run, cell, or disagreement does not exist."""


class PreconditionError(QAGraderError):
    """A pipeline precondition is unmet (e.g. grading with unapproved items)."""


class ConfigurationError(QAGraderError):
    """A backend or template is missing required configuration."""


class IncompleteGradesError(QAGraderError):
    """A response is missing a grade cell (or has duplicates) for a rubric point."""


class BackendError(QAGraderError):
    """Base class for completion/embedding backend failures."""


class CredentialError(BackendError):
    """Authentication failed; never retried."""


class BackendUnavailableError(BackendError):
    """Retries exhausted; carries the last observed status."""

    def __init__(self, message: str, last_status: int | None = None):
        super().__init__(message)
        self.last_status = last_status


class MissingRecordingError(BackendError):
    """Replay store has no entry for the requested prompt hash."""


class UnparseableOutputError(QAGraderError):
    """Backend output carried no recognizable score declaration."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text
