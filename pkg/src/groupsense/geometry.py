"""Camera-model geometry: deprojection, sensor alignment, ground projection.

All functions are pure.  Batched variants take ``(n, ...)`` arrays and are
the implementation; the scalar forms wrap them, so there is a single code
path for every formula.

The ground frame maps the camera's forward (z) axis to ground x and the
camera's lateral (x) axis to ground y; the camera's vertical axis is
discarded.  A point 3 m in front of the camera therefore sits at ground
``(3.0, 0.0)``.
"""

from __future__ import annotations

import math

import numpy as np

from .calibration import CameraCalibration
from .errors import BehindCameraError, InsufficientKeypointsError, InvalidDepthError
from .skeleton import Keypoint2D, Keypoint3D


def deproject_pixels(k_inv: np.ndarray, pixels: np.ndarray, depths: np.ndarray) -> np.ndarray:
    """Lift pixels with depths to camera-frame points.

    Args:
        k_inv: inverse 3x3 intrinsic matrix of the sensor the pixels live in.
        pixels: (n, 2) pixel coordinates.
        depths: (n,) depths in meters.

    Returns:
        (n, 3) camera-frame points; the z column equals ``depths``.
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depths = np.asarray(depths, dtype=np.float64).reshape(-1)
    ones = np.ones((pixels.shape[0], 1))
    homogeneous = np.concatenate([pixels, ones], axis=1)
    rays = homogeneous @ k_inv.T
    return rays * depths[:, None]


def deproject_depth_pixel(
    calib: CameraCalibration, pixel: tuple[float, float], depth: float
) -> np.ndarray:
    """Lift one depth-sensor pixel to a camera-frame point."""
    if depth <= 0.0:
        raise InvalidDepthError(f"depth must be positive, got {depth}")
    return deproject_pixels(calib.depth_intrinsics_inv, np.array([pixel]), np.array([depth]))[0]


def transform_depth_to_color(calib: CameraCalibration, points: np.ndarray) -> np.ndarray:
    """Apply the rigid depth-to-color extrinsic transform.

    Accepts a single (3,) point or an (n, 3) batch and returns the same shape.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    out = pts @ calib.rotation_depth_to_color.T + calib.translation_depth_to_color
    return out[0] if single else out


def project_points_to_color(calib: CameraCalibration, points: np.ndarray) -> np.ndarray:
    """Project camera-frame points (n, 3) to color pixels (n, 2).

    All points must have z > 0.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if np.any(pts[:, 2] <= 0.0):
        raise BehindCameraError("cannot project a point with nonpositive z")
    homogeneous = pts @ calib.color_intrinsics.T
    return homogeneous[:, :2] / homogeneous[:, 2:3]


def project_to_color(calib: CameraCalibration, point: np.ndarray) -> tuple[float, float]:
    """Project one camera-frame point to a color pixel."""
    uv = project_points_to_color(calib, np.asarray(point).reshape(1, 3))[0]
    return float(uv[0]), float(uv[1])


def align_depth_to_color(calib: CameraCalibration, depth_image: np.ndarray) -> np.ndarray:
    """Resample a depth image into color-pixel coordinates.

    Every valid depth pixel is deprojected, moved into the color frame, and
    projected onto the color image; each target cell keeps the smallest z
    that lands there (nearest surface wins under occlusion).  Cells nothing
    projects to hold NaN.

    Args:
        depth_image: (depth_height, depth_width) array of meters; NaN or
            nonpositive entries are treated as missing.

    Returns:
        (color_height, color_width) array of meters with NaN where unobserved.
    """
    depth_image = np.asarray(depth_image, dtype=np.float64)
    dw, dh = calib.depth_size
    if depth_image.shape != (dh, dw):
        raise ValueError(
            f"depth image shape {depth_image.shape} does not match sensor size {(dh, dw)}"
        )
    cw, ch = calib.color_size
    aligned = np.full((ch, cw), np.inf)
    valid = np.isfinite(depth_image) & (depth_image > 0.0)
    if valid.any():
        vs, us = np.nonzero(valid)
        depths = depth_image[vs, us]
        pts = deproject_pixels(calib.depth_intrinsics_inv, np.stack([us, vs], axis=1), depths)
        pts = transform_depth_to_color(calib, pts)
        in_front = pts[:, 2] > 0.0
        pts = pts[in_front]
        if pts.shape[0]:
            uv = project_points_to_color(calib, pts)
            cols = np.rint(uv[:, 0]).astype(np.int64)
            rows = np.rint(uv[:, 1]).astype(np.int64)
            inside = (cols >= 0) & (cols < cw) & (rows >= 0) & (rows < ch)
            np.minimum.at(aligned, (rows[inside], cols[inside]), pts[inside, 2])
    aligned[~np.isfinite(aligned)] = np.nan
    return aligned


def lookup_depth(aligned: np.ndarray, pixel: tuple[float, float]) -> float | None:
    """Sample an aligned depth grid at a keypoint pixel.

    Reads the rounded pixel; if that cell is missing, falls back to the
    median of the present values in the surrounding 3x3 neighborhood.
    Returns None when no depth is available there at all.
    """
    h, w = aligned.shape
    col = int(round(pixel[0]))
    row = int(round(pixel[1]))
    if not (0 <= col < w and 0 <= row < h):
        return None
    v = aligned[row, col]
    if np.isfinite(v):
        return float(v)
    window = aligned[max(row - 1, 0) : row + 2, max(col - 1, 0) : col + 2]
    present = window[np.isfinite(window)]
    if present.size == 0:
        return None
    return float(np.median(present))


def fill_keypoint_depths(persons: list[list[Keypoint2D]], aligned: np.ndarray) -> int:
    """Fill missing keypoint depths from an aligned depth grid, in place.

    Keypoints whose ``depth`` is None get the lookup_depth value at their
    pixel (or stay None when the grid has nothing there).  Returns the
    number of depths filled.
    """
    filled = 0
    for person in persons:
        for kp in person:
            if kp.depth is None:
                value = lookup_depth(aligned, (kp.u, kp.v))
                if value is not None and value > 0.0:
                    kp.depth = value
                    filled += 1
    return filled


def camera_to_world_batch(points: np.ndarray) -> np.ndarray:
    """Project camera-frame points (n, 3) onto the ground plane (n, 2)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return pts[:, (2, 0)]


def camera_to_world(point) -> tuple[float, float]:
    """Ground-plane coordinates (camera_z, camera_x) of one camera point."""
    x, _, z = point
    return float(z), float(x)


def keypoints_to_3d_batch(
    calib: CameraCalibration, pixels: np.ndarray, depths: np.ndarray
) -> np.ndarray:
    """Lift color-frame keypoint pixels with depth to camera-frame points."""
    return deproject_pixels(calib.color_intrinsics_inv, pixels, depths)


def keypoint_to_3d(calib: CameraCalibration, kp: Keypoint2D) -> Keypoint3D | None:
    """Lift one keypoint; returns None when its depth is absent."""
    if kp.depth is None:
        return None
    if kp.depth <= 0.0:
        raise InvalidDepthError(f"keypoint {kp.index} has nonpositive depth {kp.depth}")
    xyz = keypoints_to_3d_batch(calib, np.array([[kp.u, kp.v]]), np.array([kp.depth]))[0]
    camera_xyz = (float(xyz[0]), float(xyz[1]), float(xyz[2]))
    return Keypoint3D(index=kp.index, camera_xyz=camera_xyz, world_xy=(camera_xyz[2], camera_xyz[0]))


def person_position(
    keypoints3d: list[Keypoint3D],
    confidences: list[float],
    min_confidence: float = 0.3,
    min_valid: int = 4,
) -> tuple[float, float]:
    """Mean ground-plane position over the accepted keypoints.

    A keypoint is accepted when its confidence reaches ``min_confidence``.
    Raises InsufficientKeypointsError when fewer than ``min_valid`` are
    accepted, so callers can drop the person for this frame.
    """
    accepted = [kp.world_xy for kp, c in zip(keypoints3d, confidences) if c >= min_confidence]
    if len(accepted) < min_valid:
        raise InsufficientKeypointsError(
            f"{len(accepted)} accepted keypoints, need at least {min_valid}"
        )
    sx = math.fsum(p[0] for p in accepted)
    sy = math.fsum(p[1] for p in accepted)
    n = len(accepted)
    return sx / n, sy / n
