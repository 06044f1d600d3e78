"""Exception hierarchy for taulasso."""


class TauLassoError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(TauLassoError, ValueError):
    pass


class InvalidInputError(TauLassoError, ValueError):
    pass


class InvalidSpecError(TauLassoError, ValueError):
    pass


class DegenerateWeightError(TauLassoError, ArithmeticError):
    """All standardized residuals sit in the flat region of psi0."""


class DegenerateScaleError(TauLassoError, ArithmeticError):
    pass


class DegeneratePilotError(TauLassoError, ValueError):
    pass


class SolverDivergenceError(TauLassoError, ArithmeticError):
    pass


class SingularExpectationError(TauLassoError, ArithmeticError):
    def __init__(self, message, condition_number=float("nan")):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


class InconsistentSupportError(TauLassoError, ValueError):
    pass


class UndefinedMetricError(TauLassoError, ValueError):
    pass
