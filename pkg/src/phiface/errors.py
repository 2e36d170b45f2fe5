"""Exception types shared across the package."""


class PhifaceError(Exception):
    """Base class for all package-specific errors."""


class DomainError(PhifaceError):
    """An evaluation point or parameter lies outside its admissible set."""


class CoercivityError(PhifaceError):
    """A coefficient field fails the uniform positive-definiteness bound."""


class ProfileError(PhifaceError):
    """A piecewise-polynomial profile violates coverage or smoothness rules."""


class GridError(PhifaceError):
    """A panel grid cannot be built (degenerate panel, bad node counts)."""


class TraceContinuityError(PhifaceError):
    """A co-energy trace that must be single-valued at the interface jumps."""


class ProjectorError(PhifaceError):
    """The constraint rows are rank deficient or otherwise unusable."""


class CertificateRefusedError(PhifaceError):
    """Growth-bound certificate cannot be issued for this material pair."""


class ResolventError(PhifaceError):
    """A shifted system is singular, i.e. the shift is not admissible."""


class RegridError(PhifaceError):
    """State transfer between grids violates the per-step motion limit."""


class ResolutionError(PhifaceError):
    """A quadrature or grid does not resolve a feature it must integrate."""


class ConfigError(PhifaceError):
    """Configuration file cannot be parsed or violates an invariant."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
