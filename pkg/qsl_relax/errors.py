"""Exception hierarchy shared by the simulator, geometry and ingest layers.

Every error derives from :class:`QslError` (itself a ``ValueError``) and carries
an ``exit_code`` the CLI maps straight to the process status.
"""

from __future__ import annotations

from typing import Any


class QslError(ValueError):
    """Base class for all toolkit errors."""

    exit_code = 1


class DomainError(QslError):
    """Raised for inputs outside the physical or mathematical domain."""

    exit_code = 2


class ConfigError(QslError):
    """Raised for invalid run configuration or command-line options."""

    exit_code = 2


class StepSizeError(DomainError):
    """Raised when a trotter step is too coarse for the coupling strength."""


class UnsupportedStateError(DomainError):
    """Raised for initial states outside the x–z plane."""


class BoundarySingularityError(DomainError):
    """Raised when a metric factor is evaluated on the Bloch-sphere surface."""


class DataError(QslError):
    """Raised for unusable series (too short, mismatched grids, degenerate)."""

    exit_code = 3


class SeriesParseError(DataError):
    """Raised when a series file has a malformed row.

    Attributes:
        line: 1-based line number of the offending row.
    """

    def __init__(self, message: str, line: int) -> None:
        """Store the failing line number alongside the message."""
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptySeriesError(DataError):
    """Raised when a series file holds no data rows."""


class DegenerateStateError(DataError):
    """Raised when a quantity is undefined for the given state."""


class DegeneratePathError(DataError):
    """Raised when the geodesic length vanishes and δ is undefined."""


class ConvergenceError(QslError):
    """Raised when an iterative numerical method misses its tolerance."""

    exit_code = 4


class FitError(ConvergenceError):
    """Raised when a least-squares fit fails.

    Attributes:
        best: Best-so-far ``FitResult`` (or ``None`` if nothing was evaluated).
    """

    def __init__(self, message: str, best: Any = None) -> None:
        """Keep the best-so-far result for reporting."""
        super().__init__(message)
        self.best = best
