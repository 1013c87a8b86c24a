"""Exception hierarchy.

Everything raised on purpose derives from GeolmkError so callers (and the
CLI) can tell validation problems apart from genuine bugs.
"""

from __future__ import annotations


class GeolmkError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GeolmkError):
    """Bad argument or inconsistent input data.

    ``field`` names the offending value when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class FormatError(ValidationError):
    """Malformed serialized data (headers, JSON documents, payloads)."""
