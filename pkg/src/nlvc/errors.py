"""Exception types shared across the package."""


class NlvcError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NlvcError):
    """Invalid or self-contradictory problem configuration."""


class DomainError(NlvcError):
    """A point lies outside the computational domain."""


class QuadratureError(NlvcError):
    """Quadrature weight generation failed (e.g. rank-deficient stencil)."""


class AssemblyError(NlvcError):
    """Operator or system assembly failed."""


class NumericError(NlvcError):
    """A numerical solve failed to meet its tolerance."""
