"""Exception types shared across the package."""


class RankGCNError(Exception):
    """Base class for package-specific errors."""


class ParseError(RankGCNError):
    """A file could not be parsed under its declared format."""


class ValidationError(RankGCNError):
    """Data violates an invariant (non-finite value, bad index, ...)."""


class ConfigError(RankGCNError):
    """A parameter value is inconsistent with the data or another parameter."""


class DivergenceError(RankGCNError):
    """Training produced a non-finite loss."""
