"""Exception hierarchy.

Input problems and numerical/estimation failures are kept apart so the CLI
can map them to distinct exit codes.
"""


class OccupancyError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OccupancyError, ValueError):
    """A probability or count argument lies outside its admissible range."""


class InputError(OccupancyError, ValueError):
    """Malformed or inconsistent user input."""


class MalformedCellError(InputError):
    def __init__(self, row: int, column: int, value: str):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"row {row}, column {column}: expected 0 or 1, got {value!r}")


class RaggedRowsError(InputError):
    def __init__(self, row: int, expected: int, got: int):
        self.row, self.expected, self.got = row, expected, got
        super().__init__(f"row {row}: expected {expected} columns, got {got}")


class EmptyFileError(InputError):
    pass


class InvariantViolation(InputError):
    """Sufficient statistics that no detection matrix could have produced."""


class MissingStatisticError(InputError):
    """A statistic needed by the requested estimator was not supplied."""


class NumericalError(OccupancyError):
    pass


class NoBracketError(NumericalError):
    pass


class MaxIterError(NumericalError):
    pass


class NonFiniteError(NumericalError):
    pass


class SingularInformationError(NumericalError):
    pass


class EstimationError(OccupancyError):
    pass


class DegenerateDataError(EstimationError):
    """The data carry no information about one of the parameters."""


class UndefinedPsiError(EstimationError):
    """Detection estimate is zero, so occupancy cannot be back-transformed."""


class AllDroppedError(EstimationError):
    """Every replicate of a simulation cell was excluded."""
