"""Exception types shared across the toolkit.

Two families: ``DataError`` covers malformed or inconsistent inputs
(bad files, missing planes, shape mismatches); ``DegenerateError``
covers mathematically unusable inputs (non-positive depth, rank-
deficient point sets, empty geometric intersections).  The CLI maps
the families to distinct exit codes.
"""


class DataError(Exception):
    """Input data is malformed or inconsistent."""


class DegenerateError(Exception):
    """Input is mathematically degenerate for the requested operation."""


class DepthNonPositive(DegenerateError):
    """Projection or backprojection asked for a point with d <= 0."""


class NonUnitQuaternion(DegenerateError):
    """Quaternion norm deviates from 1 beyond tolerance."""


class IntrinsicsMismatch(DataError):
    """Image extent disagrees with the camera intrinsics extent."""


class MissingPlane(DataError):
    """A required channel plane is absent from the image."""


class BadPEConfig(DataError):
    """Positional-encoding channel count is not a positive multiple of 4."""


class DegenerateOutput(DegenerateError):
    """A transform would produce an image smaller than one pixel."""


class EmptyIntersection(DegenerateError):
    """Crop window does not intersect the image."""


class DegenerateRoI(DegenerateError):
    """Region of interest has non-positive extent."""


class DegenerateConfiguration(DegenerateError):
    """Correspondence covariance is rank-deficient; pose is not unique."""


class TooFewInliers(DegenerateError):
    """Trimming left fewer than three correspondence pairs."""


class EmptyInput(DataError):
    """A metric was asked to aggregate an empty distance list."""


class EmptyMask(DataError):
    """A masked reduction has no selected pixels."""


class Unsatisfiable(DegenerateError):
    """Rejection sampling exhausted its attempt budget."""
