"""Exception hierarchy shared by all modules."""


class MicropillarError(Exception):
    """Base class for all errors raised by this package."""


class InputError(MicropillarError, ValueError):
    """Invalid user input (bad values, bad files). CLI exit code 2."""


class NonPositiveError(InputError):
    pass


class MissingReferenceError(InputError):
    pass


class UnitError(InputError):
    pass


class InvalidParamsError(InputError):
    pass


class TooFewPointsError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateSpectrumError(InputError):
    pass


class WrongModelError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class NegativeAlphaError(InputError):
    pass


class NegativeKappaError(InputError):
    pass


class NonPositiveDenominatorError(InputError):
    pass


class FitError(MicropillarError):
    """Numerical failure of an optimizer. CLI exit code 3."""


class NoConvergenceError(FitError):
    pass


class SingularJacobianError(FitError):
    pass


class NoResonanceError(FitError):
    pass


class NoGuidedModeError(FitError):
    pass
