"""Exception types raised across the toolkit."""


class CloudUpError(Exception):
    """Base class for all cloudup errors."""


class EmptyCloudError(CloudUpError, ValueError):
    """An operation received a point cloud with no points."""


class DegenerateCloudError(CloudUpError, ValueError):
    """All points coincide, so no normalization frame exists."""


class KTooLargeError(CloudUpError, ValueError):
    """A neighbor query asked for more neighbors than the cloud holds."""


class TooFewPointsError(CloudUpError, ValueError):
    """The cloud is too small for the requested neighborhood size."""


class TooManyStepsError(CloudUpError, ValueError):
    """Halving the cloud that many times would leave it empty."""


class BadCountError(CloudUpError, ValueError):
    """A requested sample count is outside the valid range."""


class BadRateError(CloudUpError, ValueError):
    """Upsampling rates must be strictly greater than 1."""


class LadderMismatchError(CloudUpError, ValueError):
    """A sampling ladder's level count does not match the model."""


class OutOfRangeError(CloudUpError, ValueError):
    """A value left its documented domain (e.g. curvature outside [0, 1])."""


class EmptyMeshError(CloudUpError, ValueError):
    """A surface reference holds no usable triangles."""


class NonFiniteLossError(CloudUpError, RuntimeError):
    """Training produced a NaN or infinite loss."""


class NonFiniteStateError(CloudUpError, RuntimeError):
    """Projection moved a query to a NaN or infinite position."""


class MalformedFileError(CloudUpError, ValueError):
    """A cloud/mesh/config file violates its format.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where = f" ({where})"
        super().__init__(f"{message}{where}")


class UnsupportedFormatError(CloudUpError, ValueError):
    """The file format is not one the toolkit reads or writes."""


class CorruptCheckpointError(CloudUpError, ValueError):
    """The checkpoint file cannot be parsed into a model."""


class CheckpointVersionError(CloudUpError, ValueError):
    """The checkpoint was written by an unknown format version."""
