"""Exception and warning types shared across the package."""


class RgaeError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(RgaeError):
    """Operands have incompatible dimensions."""


class NonSymmetric(RgaeError):
    """A stored edge lacks its mirror entry."""


class IndexOutOfRange(RgaeError):
    """Malformed CSR structure or an index outside the node range."""


class SingleView(RgaeError):
    """An operation needing several views got fewer than two."""


class EmptyView(RgaeError):
    """A view contains no edges."""


class FileError(RgaeError):
    """A file could not be read or written."""


class ParseError(RgaeError):
    """A text input line could not be parsed; the message carries the location."""


class NonScalarRoot(RgaeError):
    """backward() was called on a node that is not 1x1."""


class NumericalOverflow(RgaeError):
    """A non-finite value appeared during computation."""


class DegenerateWeights(RgaeError):
    """View weights collapsed to an unusable (all-zero) combination."""


class InvalidGamma(RgaeError):
    """The weight-distribution exponent must be positive and different from 1."""


class ConfigError(RgaeError):
    """Invalid configuration value or combination."""


class LengthMismatch(RgaeError):
    """Two aligned sequences have different lengths."""


class InsufficientNodes(RgaeError):
    """Not enough nodes or node pairs to satisfy the request."""


class DegenerateClass(UserWarning):
    """A class had no training examples and was skipped."""


class ZeroVector(UserWarning):
    """A zero-norm embedding row made the cosine undefined; the feature was set to 0."""
