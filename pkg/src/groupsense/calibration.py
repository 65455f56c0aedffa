"""Camera calibration container and calibration-file I/O.

The calibration file is a UTF-8 JSON document::

    {
      "depth": {"fx": ..., "fy": ..., "cx": ..., "cy": ..., "width": ..., "height": ...},
      "color": {"fx": ..., "fy": ..., "cx": ..., "cy": ..., "width": ..., "height": ...},
      "rotation": [9 row-major reals],
      "translation": [3 reals, meters]
    }

``rotation``/``translation`` express the rigid transform taking
depth-sensor coordinates into color-sensor coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CalibrationError

ORTHONORMALITY_TOL = 1e-9

_INTRINSIC_KEYS = ("fx", "fy", "cx", "cy", "width", "height")


def _validate_intrinsics(k: np.ndarray, label: str) -> None:
    if k.shape != (3, 3):
        raise CalibrationError(f"{label} intrinsic matrix must be 3x3, got {k.shape}")
    if not np.all(np.isfinite(k)):
        raise CalibrationError(f"{label} intrinsic matrix has non-finite entries")
    lower = np.tril(k, -1)
    if np.any(lower != 0.0):
        raise CalibrationError(f"{label} intrinsic matrix must be upper-triangular")
    if np.any(np.diag(k) <= 0.0):
        raise CalibrationError(f"{label} intrinsic matrix needs a positive diagonal")
    if k[2, 2] != 1.0:
        raise CalibrationError(f"{label} intrinsic matrix must have 1 at (2, 2)")


def _validate_rotation(r: np.ndarray) -> None:
    if r.shape != (3, 3):
        raise CalibrationError(f"rotation must be 3x3, got {r.shape}")
    residual = np.abs(r.T @ r - np.eye(3)).max()
    if residual > ORTHONORMALITY_TOL:
        raise CalibrationError(f"rotation is not orthonormal (residual {residual:.3e})")
    det = float(np.linalg.det(r))
    if abs(det - 1.0) > ORTHONORMALITY_TOL:
        raise CalibrationError(f"rotation determinant {det} is not +1")


@dataclass(frozen=True)
class CameraCalibration:
    """Intrinsics of both sensors plus the depth-to-color extrinsics.

    Arrays are made read-only on construction; the inverse intrinsic
    matrices are precomputed because deprojection sits on the hot path.
    """

    depth_intrinsics: np.ndarray
    color_intrinsics: np.ndarray
    rotation_depth_to_color: np.ndarray
    translation_depth_to_color: np.ndarray
    depth_size: tuple[int, int]  # (width, height) in pixels
    color_size: tuple[int, int]
    depth_intrinsics_inv: np.ndarray = None  # type: ignore[assignment]
    color_intrinsics_inv: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        k_d = np.asarray(self.depth_intrinsics, dtype=np.float64)
        k_c = np.asarray(self.color_intrinsics, dtype=np.float64)
        r = np.asarray(self.rotation_depth_to_color, dtype=np.float64)
        t = np.asarray(self.translation_depth_to_color, dtype=np.float64).reshape(3)
        _validate_intrinsics(k_d, "depth")
        _validate_intrinsics(k_c, "color")
        _validate_rotation(r)
        if not np.all(np.isfinite(t)):
            raise CalibrationError("translation has non-finite entries")
        for label, size in (("depth", self.depth_size), ("color", self.color_size)):
            w, h = size
            if w <= 0 or h <= 0:
                raise CalibrationError(f"{label} sensor size must be positive, got {size}")
        try:
            k_d_inv = np.linalg.inv(k_d)
            k_c_inv = np.linalg.inv(k_c)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - diag guard above
            raise CalibrationError("singular intrinsic matrix") from exc
        for arr in (k_d, k_c, r, t, k_d_inv, k_c_inv):
            arr.flags.writeable = False
        object.__setattr__(self, "depth_intrinsics", k_d)
        object.__setattr__(self, "color_intrinsics", k_c)
        object.__setattr__(self, "rotation_depth_to_color", r)
        object.__setattr__(self, "translation_depth_to_color", t)
        object.__setattr__(self, "depth_size", (int(self.depth_size[0]), int(self.depth_size[1])))
        object.__setattr__(self, "color_size", (int(self.color_size[0]), int(self.color_size[1])))
        object.__setattr__(self, "depth_intrinsics_inv", k_d_inv)
        object.__setattr__(self, "color_intrinsics_inv", k_c_inv)

    @classmethod
    def from_pinhole(
        cls,
        depth: tuple[float, float, float, float, int, int],
        color: tuple[float, float, float, float, int, int],
        rotation: np.ndarray | None = None,
        translation: np.ndarray | None = None,
    ) -> "CameraCalibration":
        """Build from (fx, fy, cx, cy, width, height) tuples per sensor."""

        def matrix(p):
            fx, fy, cx, cy = p[:4]
            return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])

        return cls(
            depth_intrinsics=matrix(depth),
            color_intrinsics=matrix(color),
            rotation_depth_to_color=np.eye(3) if rotation is None else rotation,
            translation_depth_to_color=np.zeros(3) if translation is None else translation,
            depth_size=(int(depth[4]), int(depth[5])),
            color_size=(int(color[4]), int(color[5])),
        )

    def to_dict(self) -> dict:
        def sensor(k: np.ndarray, size: tuple[int, int]) -> dict:
            return {
                "fx": k[0, 0],
                "fy": k[1, 1],
                "cx": k[0, 2],
                "cy": k[1, 2],
                "width": size[0],
                "height": size[1],
            }

        return {
            "depth": sensor(self.depth_intrinsics, self.depth_size),
            "color": sensor(self.color_intrinsics, self.color_size),
            "rotation": [float(v) for v in self.rotation_depth_to_color.ravel()],
            "translation": [float(v) for v in self.translation_depth_to_color],
        }


def default_d435i_calibration() -> CameraCalibration:
    """A RealSense-D435i-like pinhole calibration used by the synthesizer."""
    return CameraCalibration.from_pinhole(
        depth=(425.0, 425.0, 424.0, 240.0, 848, 480),
        color=(910.0, 910.0, 640.0, 360.0, 1280, 720),
        rotation=np.eye(3),
        translation=np.array([0.015, 0.0, 0.0]),
    )


def parse_calibration(text: str) -> CameraCalibration:
    """Parse a calibration JSON document, rejecting invalid camera models."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CalibrationError("top-level value must be an object")
    for key in ("depth", "color", "rotation", "translation"):
        if key not in doc:
            raise CalibrationError(f"missing field {key!r}")

    def sensor(key: str) -> tuple:
        block = doc[key]
        if not isinstance(block, dict):
            raise CalibrationError(f"{key!r} must be an object")
        vals = []
        for name in _INTRINSIC_KEYS:
            if name not in block:
                raise CalibrationError(f"{key!r} is missing {name!r}")
            v = block[name]
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise CalibrationError(f"{key}.{name} must be numeric")
            vals.append(float(v))
        return (vals[0], vals[1], vals[2], vals[3], int(vals[4]), int(vals[5]))

    rotation = doc["rotation"]
    translation = doc["translation"]
    if not isinstance(rotation, list) or len(rotation) != 9:
        raise CalibrationError("rotation must be a list of 9 row-major reals")
    if not isinstance(translation, list) or len(translation) != 3:
        raise CalibrationError("translation must be a list of 3 reals")
    try:
        r = np.array([float(v) for v in rotation], dtype=np.float64).reshape(3, 3)
        t = np.array([float(v) for v in translation], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CalibrationError(f"non-numeric extrinsics: {exc}") from exc
    return CameraCalibration.from_pinhole(sensor("depth"), sensor("color"), r, t)


def load_calibration(path: str | Path) -> CameraCalibration:
    return parse_calibration(Path(path).read_text(encoding="utf-8"))


def save_calibration(calib: CameraCalibration, path: str | Path) -> None:
    Path(path).write_text(json.dumps(calib.to_dict(), indent=2) + "\n", encoding="utf-8")
