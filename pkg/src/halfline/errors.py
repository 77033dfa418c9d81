"""Exception hierarchy shared by all modules."""


class HalflineError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HalflineError, ValueError):
    """An argument lies outside the domain of an operation."""


class EdgeProximityError(DomainError):
    """Energy too close to an open band edge for a finite-difference derivative."""


class ConfigError(HalflineError, ValueError):
    """Invalid integrator or experiment configuration."""


class IntegrationOverflowError(HalflineError, OverflowError):
    """Solution magnitude left the representable range during propagation."""


class ResolutionError(HalflineError):
    """A scan grid is too coarse to resolve the structure it is looking for."""


class RangeError(HalflineError, ValueError):
    """Not enough data (zeros, bands, samples) for the requested statistic."""


class OrderingError(HalflineError, ValueError):
    """Measure pair does not satisfy the required ordering mu <= mu*."""


class ResolutionWarning(UserWarning):
    """Suspicious sign pattern (for example a possible double root) during a scan."""
