"""Exception types shared across the package."""


class CutoffLabError(Exception):
    """Base class for all package errors."""


class InvalidParametersError(CutoffLabError):
    """Contest parameters violate their constraints."""


class ParseError(CutoffLabError):
    """A CSV row could not be parsed."""


class SchemaError(CutoffLabError):
    """A CSV file does not match the documented header."""


class InvariantError(CutoffLabError):
    """A record violates a dataset invariant (e.g. rank out of range)."""


class EmptySideError(CutoffLabError):
    """A window or bandwidth leaves one side of the cutoff without data."""


class EstimationError(CutoffLabError):
    """The estimator cannot be computed (rank-deficient design, too few
    clusters, insufficient support on a side)."""


class ConfigError(CutoffLabError):
    """A simulation or CLI configuration is invalid."""
