import math

import numpy as np
import pytest

from groupsense.calibration import CameraCalibration, default_d435i_calibration
from groupsense.scenarios import BODY_TEMPLATE
from groupsense.skeleton import Keypoint3D


@pytest.fixture
def calib() -> CameraCalibration:
    return default_d435i_calibration()


def make_person_keypoints(
    x: float, y: float, theta: float, camera_height: float = 0.9
) -> list[Keypoint3D]:
    """Template body keypoints at a ground pose, as lifted Keypoint3D."""
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    out = []
    for k, (lateral, height) in enumerate(BODY_TEMPLATE):
        gx = x + lateral * sin_t
        gy = y - lateral * cos_t
        cam = (gy, camera_height - height, gx)
        out.append(Keypoint3D(index=k, camera_xyz=cam, world_xy=(cam[2], cam[0])))
    return out


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random proper rotation via QR with sign fixing."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
