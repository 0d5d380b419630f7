"""Exception types shared across the toolkit.

Everything derives from ValueError so callers that do not care about the
distinction can catch one base class.  The CLI maps these onto exit codes,
which is why the corruption error carries a line number.
"""

from __future__ import annotations


class InvalidPoseError(ValueError):
    """Rotation block is not a proper rotation (orthonormal, det +1)."""


class GeometryError(ValueError):
    """Input geometry is too degenerate for the requested operation."""


class EmptyInputError(ValueError):
    """An operation received an empty trajectory or candidate set."""


class ShapeError(ValueError):
    """Array dimensions disagree with the declared weight/query layout."""


class AlignmentError(ValueError):
    """Two sequences that must share a length (or dt) do not."""


class HorizonError(ValueError):
    """A requested horizon falls outside the available waypoints."""


class ConfigError(ValueError):
    """A run configuration value is missing, malformed or out of range."""


class LogCorruptionError(ValueError):
    """A persisted log line failed to parse or validate."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number
