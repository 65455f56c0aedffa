"""Exception types raised by the groupsense library."""


class GroupsenseError(Exception):
    """Base class for all library errors."""


class CalibrationError(GroupsenseError):
    """Calibration data is malformed or violates camera-model invariants."""


class InvalidDepthError(GroupsenseError):
    """A depth value is nonpositive where a positive range is required."""


class BehindCameraError(GroupsenseError):
    """A 3D point with nonpositive forward coordinate cannot be projected."""


class InsufficientKeypointsError(GroupsenseError):
    """Too few accepted keypoints to estimate a person's state."""


class DegenerateNormalError(GroupsenseError):
    """A body-plane normal is undefined (zero length or collinear keypoints)."""


class EmptyPolygonError(GroupsenseError):
    """An operation that needs polygon vertices received none."""


class IncompatibleGridsError(GroupsenseError):
    """Two costmaps with different origin, resolution, or size cannot merge."""


class FrameParseError(GroupsenseError):
    """A frame stream violates the line-record schema.

    Attributes:
        line_number: 1-based line of the first offending record.
    """

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
