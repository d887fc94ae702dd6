"""Exception hierarchy shared by all modules."""


class MSNARError(Exception):
    """Base class for domain errors (the CLI maps these to exit status 1)."""


class ModelValidationError(MSNARError, ValueError):
    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class DomainError(MSNARError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AmbiguityError(MSNARError):
    """The stationary distribution is not unique."""


class ConvergenceError(MSNARError):
    def __init__(self, message, estimate=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations


class NumericError(MSNARError, FloatingPointError):
    pass


class GuardError(MSNARError):
    """A brute-force computation would be too large."""


class OptimizationError(MSNARError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DegenerateRegimeError(MSNARError):
    pass


class LabelTieError(MSNARError):
    """Two regimes are indistinguishable under every sort key."""


class ExperimentError(MSNARError):
    pass
