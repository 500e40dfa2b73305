"""Exception hierarchy shared by all modules."""


class NFDPError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NFDPError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(NFDPError, ValueError):
    """Input data (kernel literal, config) failed validation."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [message])


class ImpossibleEvidenceError(NFDPError, ArithmeticError):
    """A Bayes update hit a zero normalizer."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class CapacityError(NFDPError, RuntimeError):
    """An enumeration would exceed its configured cap."""

    def __init__(self, message, count=None, cap=None, stage=None):
        super().__init__(message)
        self.count = count
        self.cap = cap
        self.stage = stage


class ConvergenceError(NFDPError, RuntimeError):
    """An iterative method failed to converge."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConsistencyError(NFDPError, RuntimeError):
    """Internal bookkeeping invariant broken (signals a bug)."""


class PreconditionError(DomainError):
    """A scheme was asked to run on a channel it does not support."""
