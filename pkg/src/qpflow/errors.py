"""Exception hierarchy shared by every qpflow module."""


class QPFlowError(Exception):
    """Base class for all qpflow errors."""


class DimensionError(QPFlowError, ValueError):
    """Array shapes do not agree with the graph or with each other."""


class ParameterError(QPFlowError, ValueError):
    """A norm parameter (q, p, eps, ...) is outside its admissible range."""


class DomainError(QPFlowError, ValueError):
    """A function was evaluated outside the set where it is defined."""


class InfeasibleInstanceError(QPFlowError):
    """The demands cannot be routed on the graph.

    ``violations`` holds ``(component, commodity, imbalance)`` triples.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class InstanceFormatError(QPFlowError, ValueError):
    """Malformed instance file; ``lineno`` is 1-based (``None`` if unknown)."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class SizeLimitError(QPFlowError):
    """Instance too large for a brute-force routine."""
