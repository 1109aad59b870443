"""
Verdoorn Toolkit - Errors
-------------------------
Exception hierarchy shared by the library and the command layer.
"""

from typing import Iterable, Tuple


class VerdoornError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(VerdoornError, ValueError):
    """An argument lies outside the domain of a numerical function."""


class RankDeficiencyError(VerdoornError, ValueError):
    """A least-squares design matrix does not have full column rank."""

    def __init__(self, columns: int, rank: int):
        self.columns = columns
        self.rank = rank
        super().__init__(
            f"design matrix is rank deficient: {columns} columns but numerical rank {rank}"
        )


class PanelDataError(VerdoornError, ValueError):
    """Input panel data is malformed."""


class DuplicateKeyError(PanelDataError):
    """The same (entity, period) pair appears more than once."""

    def __init__(self, pairs: Iterable[Tuple]):
        self.pairs = list(pairs)
        listed = ", ".join(str(p) for p in self.pairs)
        super().__init__(f"duplicate (entity, period) keys: {listed}")


class SchemaError(PanelDataError):
    """The schema names a column that is not in the input."""


class EstimationError(VerdoornError, ValueError):
    """An estimator's preconditions are not met."""


class DegenerateRegressorError(EstimationError):
    """The regressor carries no usable variation."""


class InsufficientDataError(EstimationError):
    """Too few observations, entities or instruments for an estimator."""

    def __init__(self, message: str, required: int = 0, available: int = 0):
        self.required = required
        self.available = available
        super().__init__(message)


class UnitRootError(VerdoornError, ValueError):
    """A unit-root regression cannot be run on the given series."""


class ConfigError(VerdoornError, ValueError):
    """A run configuration, study file or label is invalid."""
