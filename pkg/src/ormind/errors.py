"""Exception hierarchy shared across the package."""

from __future__ import annotations


class OrmindError(Exception):
    """Base class for all package-specific errors."""


class ModelError(OrmindError):
    """Base for model construction and parsing errors.

    ``section`` locates the failing part of an exchange document
    (e.g. ``"constraints[1]"``) when the error surfaced during document
    parsing; it is ``None`` for bare expression parsing.
    """

    def __init__(self, message: str, section: str | None = None):
        super().__init__(message)
        self.section = section


class ExprSyntaxError(ModelError):
    """Malformed expression or constraint text."""

    def __init__(self, message: str, position: int, section: str | None = None):
        super().__init__(f"{message} (at position {position})", section)
        self.position = position


class UnknownVariableError(ModelError):
    def __init__(self, name: str, position: int | None = None, section: str | None = None):
        where = "" if position is None else f" (at position {position})"
        super().__init__(f"unknown variable {name!r}{where}", section)
        self.name = name
        self.position = position


class MultipleRelationsError(ModelError):
    """Constraint text contains more than one relation symbol."""


class DocumentMalformedError(ModelError):
    """Exchange document is not valid JSON or violates the document schema."""


class DuplicateNameError(ModelError):
    def __init__(self, name: str, section: str | None = None):
        super().__init__(f"duplicate name {name!r}", section)
        self.name = name


class MissingAssignmentError(ModelError):
    def __init__(self, name: str):
        super().__init__(f"assignment missing value for {name!r}")
        self.name = name


class StatusNotOptimalError(OrmindError):
    """Counterfactual analysis requires an optimal solver result."""


class NoModificationsNeededError(OrmindError):
    """Feedback was requested for a report with no needed modifications."""


class TransportError(OrmindError):
    """HTTP transport failure that survived the retry policy."""

    def __init__(self, status: int | None, body: str):
        super().__init__(f"chat completion failed (status={status}): {body[:200]}")
        self.status = status
        self.body = body


class FixtureMissError(OrmindError):
    def __init__(self, key: tuple[str, str, int]):
        super().__init__(f"no recorded fixture for key {key!r}")
        self.key = key


class ScriptExhaustedError(OrmindError):
    """Scripted client ran out of queued responses."""


class StorageWriteError(OrmindError):
    """Fixture store could not be persisted."""


class StageParseError(OrmindError):
    """A pipeline stage produced unusable output after the reprompt budget."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


class EmptyDatasetError(OrmindError):
    """No problems could be loaded from the dataset path."""
