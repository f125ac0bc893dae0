"""
Errors Module

Exception types raised across the package. The CLI maps them onto exit codes.
"""


class ThresholdLabError(Exception):
    """Base class for every error raised by this package."""


class RejectedInputError(ThresholdLabError, ValueError):
    """An operation was called outside its precondition."""


class UnsupportedModelError(RejectedInputError):
    """A diagnostic was requested for a model that does not define it."""


class ScenarioError(RejectedInputError):
    """A scenario file is malformed or pairs incompatible components."""


class ThresholdSearchError(RejectedInputError):
    """The bracket handed to an empirical threshold search is not a bracket."""


class NumericalFailure(ThresholdLabError, RuntimeError):
    """A numerical procedure could not deliver a trustworthy result."""
