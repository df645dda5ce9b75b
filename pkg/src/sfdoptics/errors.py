"""Exception types shared across the package.

Every error raised deliberately by this package derives from
:class:`SfdOpticsError`, so callers (and the command line driver) can
distinguish usage problems from genuine bugs.
"""


class SfdOpticsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidImageError(SfdOpticsError):
    """Pixel values violate the invariants of the declared image kind."""


class DimensionMismatchError(SfdOpticsError):
    """Images that must share width/height/pixel pitch do not."""


class KindMismatchError(SfdOpticsError):
    """An image of one physical kind was supplied where another was required."""


class NonPositiveReferenceError(SfdOpticsError):
    """A reference amplitude contains zero or negative pixels."""


class EmptyListError(SfdOpticsError):
    """An operation over a collection of images received an empty collection."""


class IoError(SfdOpticsError):
    """File could not be read or written."""


class MalformedMetadataError(SfdOpticsError):
    """A sidecar header is missing required fields or contains invalid values."""


class InvalidConfigError(SfdOpticsError):
    """A configuration value violates its documented range."""


class OutOfGridError(SfdOpticsError):
    """A lookup-table query lies outside the tabulated grid."""


class NonMonotonicError(SfdOpticsError):
    """A grid or calibration table that must be strictly ascending is not."""


class AngleOverflowError(SfdOpticsError):
    """Surface tilt exceeds the range where intensity correction is trusted."""


class EmptyMaskError(SfdOpticsError):
    """A pixel mask selects no pixels."""


class ZeroReferenceError(SfdOpticsError):
    """A normalising reference sums to zero."""


class OutOfBoundsError(SfdOpticsError):
    """A region of interest extends past the image edge."""


class ModeMismatchError(SfdOpticsError):
    """Dataset export inputs are inconsistent with the requested mode."""


class UnknownKeyError(SfdOpticsError):
    """A configuration mapping contains a key the schema does not define."""
