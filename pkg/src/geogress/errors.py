"""Exception types shared across the package."""


class GeogressError(Exception):
    """Base class for all geogress errors."""


class DimensionMismatch(GeogressError):
    """Array shapes are inconsistent with each other or with the model."""


class NotOrthonormal(GeogressError):
    """A matrix required to have orthonormal columns does not."""


class NotTangent(GeogressError):
    """The direction basis is not orthogonal to the base basis."""


class NonpositiveTime(GeogressError):
    """A curvature weight was requested at a non-positive time."""


class RankTooLarge(GeogressError):
    """Requested SVD rank exceeds what the data can support."""


class InitFailure(GeogressError):
    """An initialization strategy cannot produce a model for this dataset."""


class EmptySegment(GeogressError):
    """A knot interval contains no samples."""


class InvalidSpec(GeogressError):
    """An experiment specification violates its invariants."""


class IoFailure(GeogressError):
    """Reading or writing a file failed at the OS level."""


class MalformedFile(GeogressError):
    """A file does not conform to the expected text format."""


class RankCollapseWarning(UserWarning):
    """The Procrustes target matrix is numerically rank deficient.

    The update is still valid (the orthogonal polar factor remains a Stiefel
    point), but some columns are no longer pinned down by the data.
    """
