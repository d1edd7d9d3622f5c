"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and its
subclasses -> 3, NumericError and its subclasses -> 4.
"""


class PathFusionError(Exception):
    """Base class for all package errors."""


class ConfigError(PathFusionError):
    """Invalid configuration file, key, or value."""


class DataError(PathFusionError):
    """Unreadable, malformed, or inconsistent input data."""


class ParseError(DataError):
    """Syntactically malformed input file."""


class FormatError(DataError):
    """Binary container violates its documented layout."""


class LengthError(FormatError):
    """Payload size disagrees with the container header."""


class FitError(DataError):
    """Not enough usable data to fit a statistic."""


class MetricError(DataError):
    """Metric undefined on the given cohort."""


class NumericError(PathFusionError):
    """Numeric failure: non-finite values, degenerate reductions."""


class ContractError(NumericError):
    """Operation precondition violated by the caller."""


class DimensionError(ContractError):
    """Operand shapes incompatible with the operation."""


class DegenerateRowError(NumericError):
    """Softmax row with every entry masked."""
