"""Exception types raised across the package."""


class NodalLabError(Exception):
    """Base class for all package errors."""


class InvalidDomain(NodalLabError, ValueError):
    pass


class NonConvergence(NodalLabError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""


class EmptyDecomposition(NodalLabError, ValueError):
    pass


class NotApplicable(NodalLabError, ValueError):
    """A measurement was requested outside its precondition."""


class ResolutionTooCoarse(NodalLabError, ValueError):
    pass


class PreconditionViolation(NodalLabError, ValueError):
    pass
