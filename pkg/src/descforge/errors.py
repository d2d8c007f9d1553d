"""Exception hierarchy shared across the toolkit.

``DescforgeError`` is the base for data/processing failures (CLI exit code 3);
argument validation uses plain ``ValueError`` (CLI exit code 2).
"""


class DescforgeError(Exception):
    """Base class for all toolkit-level errors."""


# -- mesh ------------------------------------------------------------------

class ParseError(DescforgeError):
    """A mesh file is malformed or uses an unsupported layout."""


class IndexOutOfRange(DescforgeError):
    """A face references a vertex index past the vertex count."""


class DegenerateFace(DescforgeError):
    """A triangle with area at or below the degeneracy floor was encountered."""


class EmptyMesh(DescforgeError):
    """An operation that needs geometry received a mesh with no faces."""


# -- spectral --------------------------------------------------------------

class SingularC(DescforgeError):
    """The connectivity diagonal has a non-positive entry; the eigenproblem is ill-posed."""


class ConvergenceFailure(DescforgeError):
    """The iterative eigensolver did not converge."""


class MultiComponent(DescforgeError):
    """The mesh graph is disconnected (more than one near-zero eigenvalue)."""


class InsufficientSpectrum(DescforgeError):
    """The mesh cannot supply the requested number of descriptor dimensions."""


class ConstantDimension(DescforgeError):
    """A descriptor dimension has no spread and cannot be min-max normalized."""


# -- rendering -------------------------------------------------------------

class UnnormalizedField(DescforgeError):
    """Rendering requires a field normalized to [0, 1]."""


class MissingBackground(DescforgeError):
    """Rendering requires the field's background descriptor to be set."""


class EmptyMask(DescforgeError):
    """The object mask has no pixels set."""


class DegenerateTrajectory(DescforgeError):
    """A camera trajectory with a non-positive radius was requested."""


# -- correspondences / losses ----------------------------------------------

class RegistrationMismatch(DescforgeError):
    """Two frames do not share camera intrinsics and cannot be cross-sampled."""


class ExhaustedSampling(DescforgeError):
    """The correspondence sampler ran out of attempts (visibility too low)."""


class EmptySet(DescforgeError):
    """A loss was requested over a correspondence set with no pairs."""


class ShapeMismatch(DescforgeError):
    """Predicted and target descriptor images have different shapes."""


# -- tracking / grasping ----------------------------------------------------

class OffObjectPixel(DescforgeError):
    """A reference pixel does not lie on the object mask."""


class InvalidDepth(DescforgeError):
    """A pixel needed for unprojection has no valid depth."""


class DimensionMismatch(DescforgeError):
    """Reference descriptors and image channels disagree on dimensionality."""


class NoValidSamples(DescforgeError):
    """Statistics were requested over an empty error collection."""


class NoValidDepth(DescforgeError):
    """An image has no depth-valid pixel to unproject."""


class DegeneratePair(DescforgeError):
    """Two grasp anchor points coincide."""


class ParallelAxis(DescforgeError):
    """The grasp reference axis is parallel to the anchor direction."""


class DatasetFormatError(DescforgeError):
    """A dataset directory or one of its files does not match the documented formats."""
