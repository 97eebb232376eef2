"""Exception types shared across the package."""


class FlowStyleError(Exception):
    """Base class for all errors raised by this package."""


class BadMagic(FlowStyleError):
    """A binary file does not start with the expected magic value."""


class VersionUnsupported(FlowStyleError):
    """A binary file declares a format version this reader does not handle."""


class TruncatedFile(FlowStyleError):
    """A binary file ended before its declared payload was complete."""


class TrailingData(FlowStyleError):
    """A binary file contains bytes past its declared payload."""


class ShapeMismatch(FlowStyleError):
    """Array shapes disagree with what a declaration or peer array requires."""


class UnknownLayer(FlowStyleError):
    """A layer name was requested that the network does not contain."""


class SizeMismatch(FlowStyleError):
    """Two images or fields that must share dimensions do not."""


class LengthMismatch(FlowStyleError):
    """Two sequences that must have matching lengths do not."""


class EmptyMask(FlowStyleError):
    """A validity mask contains no true pixels."""


class ImageTooSmall(FlowStyleError):
    """An image is below the minimum size an operation requires."""


class ChannelMismatch(FlowStyleError):
    """Two images that must share a channel count do not."""


class EmptySequence(FlowStyleError):
    """A frame sequence that must be nonempty is empty."""


class AllTermsZero(FlowStyleError):
    """Every energy term is zero, so weight balancing is undefined."""


class NonFiniteEnergy(FlowStyleError):
    """The energy became NaN or infinite during optimization."""


class MissingFrame(FlowStyleError):
    """An expected frame file is absent from the input sequence."""


class FlowUnavailable(FlowStyleError):
    """An externally supplied flow file is absent or unreadable."""
