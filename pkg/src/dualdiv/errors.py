"""Exception hierarchy for dualdiv."""


class DualDivError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DualDivError, ValueError):
    """An argument lies outside the domain of the requested function."""


class ValidationError(DualDivError, ValueError):
    """Model parameters violate a hard validity requirement."""


class SolverError(DualDivError, RuntimeError):
    """A numerical solver could not produce a trustworthy answer."""


class DegenerateBarrierError(SolverError):
    """The shooting normalisation for the barrier value vanished."""


class TruncationError(SolverError):
    """The truncated domain is too short for the decay condition to pin the solution."""


class GridMismatchError(DualDivError, ValueError):
    """Two grid functions that must share a grid do not."""


class ExistenceError(DualDivError):
    """No crossing gamma(beta) = 1 was found on the search range.

    The sampled curve is attached so callers can inspect it.
    """

    def __init__(self, message, gamma_curve=()):
        super().__init__(message)
        self.gamma_curve = list(gamma_curve)
