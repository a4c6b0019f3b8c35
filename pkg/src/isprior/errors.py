"""Exception types shared across the package.

The CLI maps these onto exit codes: ``DomainError`` -> 3, ``NumericError``
(and subclasses) -> 4.
"""


class DomainError(ValueError):
    """An input lies outside the domain of the requested operation."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class RegimeError(NumericError):
    """Arguments fall outside the regime where the series evaluator is trusted."""


class BudgetError(NumericError):
    """An accept-reject sampler ran out of proposals.

    ``partial`` carries whatever draws were accepted before the budget ran out.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DegeneracyWarning(UserWarning):
    """Importance weights collapsed onto a handful of draws."""
