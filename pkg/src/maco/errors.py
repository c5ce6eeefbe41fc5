"""Exception types shared across the package."""

from __future__ import annotations


class MacoError(Exception):
    """Base class for all package-specific errors."""


class ParseError(MacoError, ValueError):
    """Malformed input text.

    Carries the 1-based line number of the offending line so callers can
    point users at the exact spot in the file.
    """

    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class ValidationError(MacoError, ValueError):
    """Observation data that violates the model assumptions.

    Wraps the full :class:`maco.model.ValidationReport` so callers can
    inspect every violation, not just the first.
    """

    def __init__(self, report):
        self.report = report
        super().__init__(report.describe())


class NumericalAbort(MacoError, RuntimeError):
    """The solver produced non-finite values or broke a run invariant."""
