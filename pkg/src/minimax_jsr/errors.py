"""Exception types raised across the package."""


class DimensionMismatch(ValueError):
    pass


class NonSquareError(ValueError):
    pass


class InvalidMatrix(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    """Enumeration stopped after the configured number of leaf evaluations.

    ``partial`` holds the best value reached before stopping (or ``None``
    when nothing was completed) and ``bound`` says which side it bounds.
    """

    def __init__(self, message, partial=None, bound=None, evaluated=0):
        super().__init__(message)
        self.partial = partial
        self.bound = bound
        self.evaluated = evaluated


class PositivityError(ValueError):
    pass


class ChainError(ValueError):
    pass


class NoSaddle(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SchemaError(ValueError):
    pass
