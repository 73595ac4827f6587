"""Exception types raised across the toolkit."""


class EvsynthError(ValueError):
    """Base class for all toolkit errors."""


class DegeneratePathError(EvsynthError):
    """A pose path has zero total length and cannot be interpolated."""


class DegenerateWindowError(EvsynthError):
    """A rotation window is antipodal-degenerate (mean quaternion ~ 0)."""


class InsufficientPosesError(EvsynthError):
    """Not enough poses for the requested operation."""


class InvalidProfileError(EvsynthError):
    """A velocity profile produced a nonpositive speed sample."""


class InvalidIntervalError(EvsynthError):
    """A time interval is empty or reversed."""


class MalformedSequenceError(EvsynthError):
    """A frame sequence violates dimension or time-ordering constraints."""


class InvalidWindowError(EvsynthError):
    """An accumulation/voxelization time window is empty or reversed."""


class FormatError(EvsynthError):
    """A file or byte stream does not conform to its declared format."""
