"""Exception types shared across the package."""


class DmrError(Exception):
    """Base class for all package-specific errors."""


class InvalidParams(DmrError):
    """Parameters violate the constraints required for simulation."""


class NotPSD(DmrError):
    """Correlation matrix has an eigenvalue below the PSD tolerance."""


class WrongRegime(DmrError):
    """Closed-form operation called outside its diffusion-exponent regime."""


class NonErgodic(DmrError):
    """Stationary-law operation called with a2 = 0 (no stationary density)."""


class QuadratureFailure(DmrError):
    """Adaptive quadrature could not reach the requested relative error."""


class InvalidReflection(DmrError):
    """Reflection level must satisfy 0 < m < y0."""


class DriverOrderViolated(DmrError):
    """Comparison drivers must satisfy u1 >= u2 >= 0 on the whole grid."""
