"""Exception types raised by the library."""


class CrowdTypesError(Exception):
    """Base class for all library-specific errors."""


class InvalidParameterError(CrowdTypesError, ValueError):
    """A model or configuration parameter is out of its valid range."""


class InvalidAssignmentError(CrowdTypesError, ValueError):
    """A task assignment request cannot be satisfied (e.g. k > n)."""


class InsufficientClusterError(InvalidAssignmentError):
    """A cluster is smaller than the requested per-cluster query count."""


class NoVotesError(CrowdTypesError, ValueError):
    """A vote was requested on an empty answer set."""


class ShapeError(CrowdTypesError, ValueError):
    """Mismatched lengths or malformed array shapes."""


class InvalidWeightsError(CrowdTypesError, ValueError):
    """Weight vector is empty, non-finite, or identically zero."""


class EstimationFailureError(CrowdTypesError, RuntimeError):
    """Reliability estimation had no usable tasks."""


class NumericalFailureError(CrowdTypesError, RuntimeError):
    """An iterative numerical routine failed to converge."""
