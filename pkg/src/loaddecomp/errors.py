"""Exception hierarchy.

Every error carries a short ``cause`` slug. The CLI prints it as a single
machine-readable line on stderr and exits with code 2.
"""


class LoadDecompError(Exception):
    """Base class for all data and model errors."""

    cause = "error"

    def __init__(self, message, cause=None):
        super().__init__(message)
        if cause is not None:
            self.cause = cause


class FormatError(LoadDecompError):
    cause = "format-error"


class ValidationError(LoadDecompError):
    cause = "validation-error"


class GapTooLongError(LoadDecompError):
    cause = "gap-too-long"


class InsufficientDataError(LoadDecompError):
    cause = "insufficient-data"


class OutlierRepairRefused(LoadDecompError):
    cause = "too-many-outliers"


class NoDataError(LoadDecompError):
    cause = "no-data"


class ContiguityError(LoadDecompError):
    cause = "missing-dates"


class SolarDomainError(LoadDecompError):
    cause = "solar-domain"


class CoverageError(LoadDecompError):
    cause = "coverage"


class RankDeficiencyError(LoadDecompError):
    cause = "rank-deficient"

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class DegenerateModelError(LoadDecompError):
    cause = "degenerate-model"


class InsufficientHistoryError(LoadDecompError):
    cause = "insufficient-history"


class CalendarError(LoadDecompError):
    cause = "calendar"


class ParameterError(LoadDecompError):
    cause = "parameter"


class GenerationError(LoadDecompError):
    cause = "generation"


class ConfigError(LoadDecompError):
    cause = "config"
