"""Exception types shared across the package."""


class CvVerifyError(Exception):
    """Base class for all package errors."""


class ConfigError(CvVerifyError):
    """A parameter or configuration value violates its documented constraint."""


class DimensionError(CvVerifyError):
    """Invalid or incompatible truncation dimensions / mode counts."""


class ContractViolation(CvVerifyError):
    """An input does not satisfy a structural precondition (hermiticity, purity, ...)."""


class TruncationError(CvVerifyError):
    """The truncation dimension or grid is too small for the requested object."""


class DegenerateError(CvVerifyError):
    """A construction is degenerate for the given inputs (zero cubicity, unit fidelity, ...)."""
