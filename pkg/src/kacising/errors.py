"""Exception types shared across the package.

Every error raised on a contract violation is a subclass of
:class:`KacIsingError`, so callers can catch the package's failures with a
single except clause while tests pin down the specific type.
"""


class KacIsingError(Exception):
    """Base class for all package-specific errors."""


class ParamError(KacIsingError):
    """Model parameters outside their domain (beta <= 1, zeta <= 0, ...)."""


class DivisibilityError(ParamError):
    """The length hierarchy len_cg | len_minus | range | len_plus is broken."""


class EnumerationCapError(ParamError):
    """Block length too large to enumerate block states exactly."""


class DomainError(KacIsingError):
    """Scalar argument outside the mathematical domain of a function."""


class BoundaryError(KacIsingError):
    """Boundary condition data missing or shorter than the coupling range."""


class TorusTooSmall(KacIsingError):
    """Periodic system too short: a pair would interact along both windings."""


class AlignmentError(KacIsingError):
    """Window length is not a whole number of coarse-graining blocks."""


class NoPhaseError(KacIsingError):
    """No block reaches either phase: the label sequence has no +1 and no -1."""


class SinglePhaseError(KacIsingError):
    """Only one phase present: no interface to decompose around."""


class NoAnchorError(KacIsingError):
    """No plus interval of length >= 3, so no rod marking exists."""


class AdmissibilityError(KacIsingError):
    """Boundary block incompatible with the requested restricted ensemble."""


class EmptyEnsembleError(KacIsingError):
    """No configuration satisfies the constraint masks (the sum is zero)."""

    def __init__(self, message: str = "constrained sum is empty"):
        super().__init__(message)
        self.log_value = float("-inf")


class SizeError(KacIsingError):
    """System size beyond the exact-enumeration or transfer budget."""


class TruncationError(KacIsingError):
    """Truncated tail too heavy for the requested tolerance, or not decaying."""


class TableMissError(KacIsingError):
    """Lookup outside a precomputed table (length beyond truncation radius)."""


class BracketError(KacIsingError):
    """Root bracketing failed: no sign change within the expansion budget."""


class WindowError(KacIsingError):
    """Observation window malformed or incompatible with the data."""


class ConfigError(KacIsingError):
    """CLI or run configuration file invalid."""


class CacheCorruption(KacIsingError):
    """On-disk cache does not parse or fails its integrity check."""


class NonConvergence(KacIsingError):
    """Iterative solver exhausted its iteration budget before the tolerance."""


class ResolutionError(KacIsingError):
    """Grid resolution incompatible with the kernel support."""


class PeriodicSupportWarning(UserWarning):
    """Coupling support wraps a sizeable fraction of a periodic system."""
