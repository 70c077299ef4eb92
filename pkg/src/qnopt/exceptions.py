"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric failures with 3.
"""


class QnoptError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QnoptError, ValueError):
    """A parameter or config violates its documented preconditions."""


class NumericError(QnoptError, ValueError):
    """Non-finite input, or a numeric routine failed to converge."""


class GraphGenerationError(NumericError):
    """Random graph generation could not produce a connected graph."""


class ConvergenceError(NumericError):
    """An iterative solver hit its iteration cap before reaching tolerance."""
