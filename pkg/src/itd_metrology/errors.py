"""Exception types shared across the package.

Each class carries an ``exit_code`` used by the command-line front end.
"""


class ItdError(Exception):
    exit_code = 1


class BadParamsError(ItdError, ValueError):
    exit_code = 2


class InputFormatError(ItdError, ValueError):
    exit_code = 3


class NumericalGuardError(ItdError, ArithmeticError):
    exit_code = 4


class NonHermitianError(NumericalGuardError):
    pass


class NonUnitaryError(NumericalGuardError):
    pass


class DimensionMismatchError(BadParamsError):
    pass


class ShiftTooLargeError(BadParamsError):
    pass


class SupportOverflowError(NumericalGuardError):
    pass


class StepTooSmallError(NumericalGuardError):
    pass


class DegenerateProbabilityError(NumericalGuardError):
    pass


class NonOrthogonalEnsembleError(NumericalGuardError):
    pass


class EmptyRecordError(BadParamsError):
    pass


class EmptyListError(BadParamsError):
    pass


class BadGridError(BadParamsError):
    pass


class EmptyHistogramError(BadParamsError):
    pass
