"""Exception types shared across the package."""


class PathAttrError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(PathAttrError):
    """Dimension or shape-metadata mismatch between inputs."""


class DomainError(PathAttrError):
    """Parameter value outside its valid range."""


class NumericalError(PathAttrError):
    """Non-finite value encountered mid-computation."""


class ConfigError(PathAttrError):
    """Invalid experiment configuration or missing run artifact."""


class DegenerateInputError(PathAttrError):
    """Metric undefined for this input (guard threshold tripped)."""
