from __future__ import annotations


class ReserveError(Exception):
    """Base class for every error raised by reservebench.

    ``code`` is the machine-readable tag printed by the CLI as ``error[CODE]``.
    ``exit_code`` is the process status the CLI returns for it.
    """

    code = "reserve"
    exit_code = 2


class MaskError(ReserveError):
    code = "mask"


class ParseError(ReserveError):
    code = "parse"

    def __init__(self, message: str, row: int, column: int | None = None):
        where = f"row {row}" if column is None else f"row {row}, column {column}"
        super().__init__(f"{where}: {message}")
        self.row = row
        self.column = column


class ShapeError(ReserveError):
    code = "shape"


class DegenerateColumn(ReserveError):
    code = "degenerate-column"

    def __init__(self, column: int, message: str = "column sum is not positive"):
        super().__init__(f"development column {column}: {message}")
        self.column = column


class DegeneratePattern(ReserveError):
    code = "degenerate-pattern"

    def __init__(self, row: int):
        super().__init__(f"row {row}: observed payout-pattern mass is not positive")
        self.row = row


class DegenerateDispersion(ReserveError):
    code = "degenerate-dispersion"


class NonPositiveFit(ReserveError):
    code = "non-positive-fit"

    def __init__(self, row: int, column: int, value: float):
        super().__init__(f"fitted mean at ({row}, {column}) is {value!r}, must be > 0")
        self.row = row
        self.column = column


class NonPositiveCumulative(ReserveError):
    code = "non-positive-cumulative"

    def __init__(self, row: int, column: int):
        super().__init__(f"log development factor undefined at ({row}, {column})")
        self.row = row
        self.column = column


class EmptyPool(ReserveError):
    code = "empty-pool"

    def __init__(self, column: int):
        super().__init__(f"factor pool for column {column} is empty")
        self.column = column


class DegenerateFactor(ReserveError):
    code = "degenerate-factor"

    def __init__(self, row: int, column: int):
        super().__init__(f"zero cumulative claim at ({row}, {column}) in a needed ratio")
        self.row = row
        self.column = column


class ReplicateFailure(ReserveError):
    code = "replicate-failure"


class InvalidParams(ReserveError):
    code = "invalid-params"


class UnsupportedCombination(ReserveError):
    code = "unsupported"


class ConfigError(ReserveError):
    code = "config"


class ReportIOError(ReserveError):
    code = "io"


class StudyFailure(ReserveError):
    code = "study"
    exit_code = 3


class NegativeIncrement(ReserveError):
    code = "negative-increment"

    def __init__(self, row: int, column: int, value: float):
        super().__init__(f"increment at ({row}, {column}) is negative: {value!r}")
        self.row = row
        self.column = column
