"""Exception hierarchy.

Three families map onto the CLI exit codes: validation problems (1),
numerical failures (2) and I/O failures (3).
"""

from __future__ import annotations

from typing import Any


class StochGrowthError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ValidationError(StochGrowthError, ValueError):
    """Invalid argument, data or configuration."""

    exit_code = 1


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class IncompatibleLawError(ValidationError):
    """Laws that cannot be combined (e.g. different Gamma rates)."""


class CoverageError(ValidationError):
    """Grid does not cover the region an operation needs."""


class NormalizationError(ValidationError):
    """Density that should integrate to one does not."""


class UnsupportedOrderError(ValidationError):
    """Requested moment order is not implemented."""


class DivergenceError(ValidationError):
    """Series or integral diverges for the requested parameters."""


class CollinearityError(ValidationError):
    """Design matrix is rank deficient."""


class AlignmentError(ValidationError):
    """Time indices of two inputs do not line up."""


class ParseError(ValidationError):
    """Malformed input file."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ConfigError(ValidationError):
    """Bad configuration value; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalError(StochGrowthError, ArithmeticError):
    """A numerical procedure failed."""

    exit_code = 2


class ConvergenceError(NumericalError):
    """Iteration cap reached without meeting the tolerance."""


class OptimizationError(NumericalError):
    """Likelihood maximisation failed; ``diagnostics`` holds the last iterate."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class ClosureBreakdownError(NumericalError):
    """Moment closure produced a negative variance."""


class StepSizeError(NumericalError):
    """Time step violates a stability bound; ``suggested_dt`` satisfies it."""

    def __init__(self, message: str, suggested_dt: float):
        self.suggested_dt = suggested_dt
        super().__init__(f"{message} (suggested dt <= {suggested_dt:.6g})")


class DataIOError(StochGrowthError, OSError):
    """Reading, writing or fetching data failed."""

    exit_code = 3


class FetchError(DataIOError):
    """Remote fetch failed after retries; ``status`` is the last HTTP status."""

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message if status is None else f"{message} (status {status})")


class OfflineError(FetchError):
    """Offline mode requested and the cache has no copy."""
