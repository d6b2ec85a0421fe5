"""Exception hierarchy.

Two families matter to callers: ``StatisticalError`` (the data or design do
not support the requested inference; the CLI maps these to exit code 2) and
plain ``ValueError`` subclasses for malformed arguments.
"""


class UReduceError(Exception):
    """Base class for every error raised by this package."""


class StatisticalError(UReduceError):
    """The statistical pipeline cannot proceed on this input."""


# kernel
class ArityMismatch(UReduceError, ValueError):
    pass


class DimensionMismatch(UReduceError, ValueError):
    pass


class UnknownKernel(UReduceError, KeyError):
    pass


# design
class DesignError(UReduceError, ValueError):
    pass


class InvalidRatio(DesignError):
    pass


class DegenerateWindow(DesignError):
    pass


class BudgetExceedsUniverse(DesignError):
    pass


class UniverseTooLarge(DesignError):
    pass


# estimation / expansion / inference
class NonpositiveVariance(StatisticalError):
    pass


class SupportTooLarge(UReduceError, ValueError):
    pass


class EnumerationTooLarge(UReduceError, ValueError):
    pass


class Assumption2Violation(StatisticalError):
    pass


class WrongScheme(StatisticalError):
    pass


# network
class InvalidProbability(UReduceError, ValueError):
    pass


class UncoveredNode(StatisticalError):
    def __init__(self, node):
        super().__init__(f"node {node + 1} is not covered by any design tuple")
        self.node = node


class ZeroCount(StatisticalError):
    pass


class RegimeMismatch(StatisticalError):
    pass


class MotifTooLarge(UReduceError, ValueError):
    pass


class GraphFormatError(UReduceError, ValueError):
    pass


# validation
class GridMismatch(UReduceError, ValueError):
    pass


class TruthUnavailable(StatisticalError):
    pass
