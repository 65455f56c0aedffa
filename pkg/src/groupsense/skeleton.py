"""Skeleton keypoint types shared across the pipeline.

The 17-joint convention (index order):

    0 nose            1 left_eye        2 right_eye
    3 left_ear        4 right_ear       5 left_shoulder
    6 right_shoulder  7 left_elbow      8 right_elbow
    9 left_wrist     10 right_wrist    11 left_hip
   12 right_hip      13 left_knee      14 right_knee
   15 left_ankle     16 right_ankle

Coordinate frames:

* camera frame: x right, y down, z forward (meters);
* ground frame: x along the camera's forward axis, y along the camera's
  lateral axis, both in meters; heights are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

KEYPOINT_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)

NUM_KEYPOINTS = len(KEYPOINT_NAMES)
LEFT_SHOULDER = 5
RIGHT_SHOULDER = 6


@dataclass(slots=True)
class Keypoint2D:
    """A detected joint in color-pixel space.

    ``depth`` is the range along the camera's forward axis in meters, or
    ``None`` when no depth reading is available at that pixel.
    """

    index: int
    u: float
    v: float
    depth: float | None
    confidence: float


class Keypoint3D(NamedTuple):
    """A joint lifted to metric space.

    ``camera_xyz`` is the position in the camera frame; ``world_xy`` is its
    ground-plane projection ``(camera_z, camera_x)``.  A NamedTuple: tens
    of these are built per frame on the hot path.
    """

    index: int
    camera_xyz: tuple[float, float, float]
    world_xy: tuple[float, float]


@dataclass(slots=True)
class PersonState:
    """One person's ground-plane pose for a single frame.

    ``theta`` is the facing direction in radians, measured in the ground
    frame from the +x axis, in ``[0, 2*pi)``.  ``orientation_confidence``
    is ``(lambda2 - lambda3) / lambda1`` of the body-plane fit: near zero
    for nearly collinear keypoint sets, near one for a well-spread body.
    ``shoulder_fallback`` is set when the front/back disambiguation could
    not run because a shoulder keypoint was missing.
    """

    person_id: int
    position: tuple[float, float]
    theta: float
    keypoints3d: list[Keypoint3D] = field(default_factory=list)
    n_valid: int = 0
    orientation_confidence: float = 0.0
    shoulder_fallback: bool = False
