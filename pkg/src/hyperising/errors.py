"""Exception hierarchy shared across the package.

Every error raised deliberately by this package derives from
:class:`HyperIsingError`, so callers can catch one base class.  The CLI
maps subclasses onto process exit codes (validation 2, capacity 3,
solver 4).
"""

from __future__ import annotations

__all__ = [
    "HyperIsingError",
    "DimensionError",
    "CapacityError",
    "GenerationError",
    "SolverError",
    "DiagnosticError",
    "ParseError",
    "EmptyResultError",
]


class HyperIsingError(Exception):
    """Base class for all package errors."""


class DimensionError(HyperIsingError, ValueError):
    """Shape or vertex-count mismatch between arguments."""


class CapacityError(HyperIsingError):
    """A requested computation exceeds a documented size cap.

    The message always names the cap that was hit, so the remedy
    (raise the cap explicitly, or shrink the instance) is visible.
    """


class GenerationError(HyperIsingError):
    """Random generation could not produce a valid object (retries exhausted)."""


class SolverError(HyperIsingError):
    """Optimizer failed to converge.  Carries the final KKT residual."""

    def __init__(self, message: str, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DiagnosticError(HyperIsingError):
    """A diagnostic routine could not certify its result.

    Used e.g. when an eigenvalue iteration fails to converge; carries the
    last residual so the caller can judge how close it got.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ParseError(HyperIsingError, ValueError):
    """Malformed input file.  Message includes the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyResultError(HyperIsingError):
    """An operation legitimately produced no data (e.g. every row filtered)."""
