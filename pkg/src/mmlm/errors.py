"""Exception types raised by the solvers."""


class DimensionError(ValueError):
    """An array argument has the wrong length or shape."""


class InfeasiblePointError(ValueError):
    """A point that must lie in the feasible set does not."""


class NumericalError(ArithmeticError):
    """A non-finite value appeared during a solve.

    ``trace`` holds the iteration records collected before the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
