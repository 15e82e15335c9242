"""Exception hierarchy.

Every error raised by the library derives from :class:`RieszLabError`, and the
CLI maps each family onto a fixed exit code (see ``rieszlab.cli``).
"""


class RieszLabError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(RieszLabError, ValueError):
    """A parameter is out of its admissible range."""


class ResourceLimitError(InvalidParameterError):
    """The requested object would be too large to build."""


class ScaleWindowError(RieszLabError, ValueError):
    """A scale lies outside the window where the discretization is meaningful."""


class SingularityError(RieszLabError, ValueError):
    """An untruncated kernel was evaluated at (or too near) its singularity."""


class DomainError(RieszLabError, ValueError):
    """A point lies outside the domain of the requested operation."""


class DegenerateInputError(RieszLabError, ValueError):
    """The input does not carry enough points to define the requested quantity."""


class ConstructionInvariantError(RieszLabError, RuntimeError):
    """A structural certificate failed. This indicates a bug."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotFittedError(RieszLabError, AttributeError):
    """An estimator was used before ``fit``."""
