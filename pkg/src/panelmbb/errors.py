"""Exception hierarchy shared across the package.

Two branches matter for the CLI exit-code contract: ``InputError`` covers
malformed or inconsistent user input, ``NumericalError`` covers failures that
arise from the data itself (singular designs, degenerate variances).
"""


class PanelMbbError(Exception):
    """Base class for all package errors."""


class InputError(PanelMbbError):
    """User-correctable input problem (bad file, bad shapes, bad options)."""


class NumericalError(PanelMbbError):
    """Data-driven numerical failure detected during computation."""


class UnbalancedPanel(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class TooFewPeriods(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class IndivisibleBlockLength(InputError):
    pass


class MalformedCsv(InputError):
    pass


class DuplicateCell(InputError):
    pass


class UnknownSpec(InputError):
    pass


class UnknownFormat(InputError):
    pass


class NonStationary(InputError):
    pass


class InsufficientReps(InputError):
    pass


class EmptyRun(InputError):
    pass


class MissingStudentization(InputError):
    pass


class SingularDesign(NumericalError):
    pass


class ExcessiveSingularRedraws(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class NegativeVariance(NumericalError):
    pass
