"""Exception hierarchy.

Each error carries the process exit code the CLI reports for it:
2 for configuration problems, 3 for data problems and 4 for numeric or
identification failures.
"""


class LingamKitError(Exception):
    exit_code = 1


class ConfigError(LingamKitError):
    exit_code = 2


class DataError(LingamKitError):
    exit_code = 3


class StructuralError(DataError):
    """Malformed input file, e.g. ragged CSV rows."""


class SchemaError(DataError):
    """Duplicate or unknown column names."""


class UnimputableColumnError(DataError):
    pass


class EncodingError(DataError):
    pass


class NumericError(LingamKitError):
    exit_code = 4


class PreconditionError(NumericError):
    pass


class DegenerateError(NumericError):
    """Zero-variance column, regressor or design."""


class IdentificationError(NumericError):
    pass


class BudgetError(NumericError):
    pass


class GraphError(LingamKitError):
    """Unknown node, cycle or malformed graph text."""

    exit_code = 3
