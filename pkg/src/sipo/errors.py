"""Exception types raised across the package."""


class SipoError(Exception):
    """Base class for all package errors."""


# --- domain partitioning ---

class AllZeroTarget(SipoError):
    """Target dose has no strictly positive entry."""


class BandWidthNegative(SipoError):
    """Band width must be a nonnegative integer (or BAND_FREE)."""


# --- operators ---

class ShapeMismatch(SipoError):
    """Array shape does not match the grid/geometry it is used with."""


class KernelTooLarge(SipoError):
    """PSF kernel extent exceeds the object grid extent."""


# --- material model ---

class OutOfInvertibleRange(SipoError):
    """Response value at or outside the (alpha, k) asymptotes.

    Carries the offending flat indices in ``self.indices``.
    """

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices


# --- metrics ---

class NonPositiveDose(SipoError):
    """Dose must be strictly positive on the gel region."""


class EmptyGel(SipoError):
    """Gel region is empty."""


class EmptyBand(SipoError):
    """Band region is empty; band metrics are undefined."""


# --- formulations ---

class InvalidWeights(SipoError):
    """Objective weights must be nonnegative with a positive sum."""


class NonPositiveThreshold(SipoError):
    """Critical dose threshold must be strictly positive."""


# --- solvers ---

class SizeLimitExceeded(SipoError):
    """Materialized constraint matrix would exceed the dense size limit."""


class InnerSolverFailure(SipoError):
    """Inner LP solve failed inside an outer iteration."""


class NonConvergence(SipoError):
    """Iterative method did not reach its tolerance."""


class NumericalBreakdown(SipoError):
    """NaN/Inf appeared in solver iterates."""


# --- post-scaling ---

class DegenerateDenominator(SipoError):
    """Weighted norm of the normalized dose is zero on the gel."""


class BracketInvalid(SipoError):
    """Scalar search bracket is empty or nonpositive."""


class NonPositiveAlpha(SipoError):
    """Scaling factor must be strictly positive."""


# --- phantoms ---

class GeometryOutOfBounds(SipoError):
    """Phantom geometry does not fit the requested grid."""


# --- file I/O ---

class UnsupportedFormat(SipoError):
    """File format not recognized."""


class CorruptHeader(SipoError):
    """File header could not be parsed."""


class ShapeMismatchWithSidecar(SipoError):
    """Raw field payload size disagrees with its JSON sidecar."""


class ConfigError(SipoError):
    """Invalid or missing configuration key.

    Carries the offending key in ``self.key``.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
