"""Exception hierarchy shared by every module.

All errors raised by this package derive from :class:`PainpaintError` so
callers (and the CLI exit-code mapping) can catch one base class.  Data
errors and backend errors have their own intermediate bases.
"""


class PainpaintError(Exception):
    """Base class for all package errors."""


class DataError(PainpaintError):
    """Problems with input data: files, formats, dimensions, contents."""


class BackendError(PainpaintError):
    """Failures from pluggable backends (estimators, inpainting services)."""


class UsageError(PainpaintError):
    """Invalid configuration or invalid call for the current state."""


# --- data errors -----------------------------------------------------------

class IoError(DataError):
    """File missing or unreadable."""


class FormatError(DataError):
    """File exists but cannot be decoded into the expected type."""


class DimensionMismatchError(DataError):
    """Paired rasters or cameras disagree in size."""


class InvalidDepthError(DataError):
    """Depth value is zero, negative, or non-finite where it must be valid."""


class BehindCameraError(DataError):
    """Point has non-positive z in the camera frame and cannot be projected."""


class InsufficientViewsError(DataError):
    """Fewer views than the operation requires."""


class UnknownNodeError(DataError):
    """Graph query for a node id that is not present."""


class UnknownViewError(DataError):
    """View id not present in the dataset or sampler round."""


class ZeroVectorError(DataError):
    """Cosine similarity of a zero-length feature vector is undefined."""


class LengthMismatchError(DataError):
    """Feature vectors of different lengths cannot be compared."""


class EmptyMaskError(DataError):
    """Operation requires a mask with at least one set pixel."""


class NoCandidatesError(DataError):
    """Candidate selection called with an empty candidate list."""


class EmptyGraphError(DataError):
    """Sampler initialised on a graph without nodes."""


class ExhaustedError(UsageError):
    """Sampler asked to begin a round with no anchor available."""


class AllExcludedError(DataError):
    """Masked loss with no counted pixels or no valid windows."""


class TooSmallError(DataError):
    """Image smaller than the metric's minimum window size."""


class SpecError(DataError):
    """Synthetic scene specification is invalid."""


class ConfigError(UsageError):
    """Pipeline configuration is invalid or incomplete."""


# --- backend errors --------------------------------------------------------

class EstimatorError(BackendError):
    """Depth estimator failed; wraps the underlying cause."""


class NetworkError(BackendError):
    """Inpainting service unreachable or transport-level failure."""


class ServiceTimeoutError(NetworkError):
    """Inpainting service did not answer within the configured timeout."""


class ProtocolError(BackendError):
    """Inpainting service answered with a malformed or inconsistent response."""


class InvariantViolationError(BackendError):
    """Inpainting backend altered pixels outside the requested mask."""
