"""Exception types shared across the package."""


class FsnavError(Exception):
    """Base class for all fsnav errors."""


class InvalidChannels(FsnavError):
    """Image has the wrong number of channels for the operation."""


class ImageTooSmall(FsnavError):
    """Image is below the minimum size for the operation."""


class ConfigError(FsnavError):
    """Invalid configuration value (line counts, missing metadata, ...)."""


class DistortionError(FsnavError):
    """Radial undistortion iteration diverged."""


class AboveHorizon(FsnavError):
    """Pixel ray does not intersect the ground plane; callers skip the point."""


class OutOfBounds(FsnavError):
    """World coordinate falls outside the costmap grid."""


class BackendError(FsnavError):
    """Segmenter backend failed (missing file, dead child process, ...)."""


class BackendTimeout(BackendError):
    """Segmenter child process did not answer within the deadline."""


class ProtocolError(BackendError):
    """Malformed FSEG frame on the segmenter wire protocol."""


class SceneError(FsnavError):
    """Synthetic scene is not renderable from the given camera."""


class ShapeError(FsnavError):
    """Array dimensions do not match."""


class DomainError(FsnavError):
    """Scalar argument outside the supported domain."""
