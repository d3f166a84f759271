"""Exception types shared across the package."""

from __future__ import annotations


class BaatcheetError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(BaatcheetError):
    """Parse or validation failure in a corpus file.

    Carries the 1-based line number of the offending input line when the
    failure can be located.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(BaatcheetError):
    """Invalid project configuration."""


class TrainingError(BaatcheetError):
    """Training cannot proceed or diverged."""


class ArchiveError(BaatcheetError):
    """Model archive is unreadable, tampered, or from an unknown format version."""


class UnknownActionError(BaatcheetError):
    """An action name has no response template."""
