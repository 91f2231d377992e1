"""Error types shared by every module.

All expected failures derive from DomainError so the CLI can map them to
exit code 1 and the HTTP layer to a 4xx status.  Everything else is a bug.
"""


class DomainError(Exception):
    """Base class for expected, user-facing failures."""


class FormatError(DomainError):
    """Malformed ingest document; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyInputError(DomainError):
    """Ingest input contained no content."""


class InvalidSurfaceError(DomainError):
    """Surface text cannot be normalized into a concept."""


class SpanBoundsError(DomainError):
    """Span does not fit inside its section."""


class QualificationError(DomainError):
    """Annotator has not passed the qualification test."""


class ArityError(DomainError):
    """Too few participants or annotator sets for the operation."""


class ConflictError(DomainError):
    """Duplicate submission, duplicate annotation, or stale round version."""


class PhaseError(ConflictError):
    """Operation attempted in a round phase that does not accept it."""


class AuthorizationError(DomainError):
    """Actor is not allowed to perform the operation."""


class NotFoundError(DomainError):
    """Referenced entity does not exist."""


class IncompleteDataError(DomainError):
    """A report was requested before the required submissions are in."""


class NotADisagreementError(DomainError):
    """Resolution filed for a case that is not a current disagreement."""


class LocateMismatchError(DomainError):
    """Accepted span does not normalize to the candidate concept."""


class ValidationError(DomainError):
    """Payload fails a structural or referential check."""


class IntegrityError(ValidationError):
    """Stored or imported state references a nonexistent entity."""


class VersionError(DomainError):
    """Corpus document format version is not supported."""


class EmptyRangeError(DomainError):
    """Statistics requested over a range with no closed rounds."""
