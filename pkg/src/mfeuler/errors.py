"""Exception and warning types shared across the package."""


class MfeulerError(Exception):
    """Base class for all package errors."""


class ConfigError(MfeulerError):
    """Invalid, unknown, or out-of-range configuration entry (CLI exit code 2)."""


class QuadratureNotConverged(MfeulerError):
    """Fallback quadrature failed its refinement residual check."""


class DivisionDegenerate(MfeulerError):
    """A spectral ratio hit an underflowing denominator inside the scan window."""


class GridTooCoarse(MfeulerError):
    """Grid spacing cannot resolve the kernel for the particle-mesh path."""


class NonFiniteState(MfeulerError):
    """A simulation state picked up a NaN or infinity."""


class DensityNotNormalizable(MfeulerError):
    """Initial density does not integrate to one within tolerance."""


class NonPositiveDensity(MfeulerError):
    """Fluid density lost strict positivity on the lattice."""


class AlphaTooSmall(MfeulerError):
    """Negative-Sobolev order too small for point masses (needs alpha > dim/2 + 1)."""


class DegenerateFit(MfeulerError):
    """Log-log fit input has too few distinct positive points."""


class KernelAliasingWarning(UserWarning):
    """Kernel carries non-negligible mass outside the half-period box."""
