"""Body-facing estimation from 3D keypoints via plane fitting.

The dominant spread of an upright body's keypoints lies in a vertical
plane; the plane's normal is the facing axis.  The plane is recovered by
eigendecomposition of the keypoint covariance, solved in closed form for
the 3x3 symmetric case (trigonometric solution of the characteristic
cubic) with a Jacobi-rotation fallback when eigenvalues nearly coincide.

Angle conventions: the unsigned angle between the body normal and the
camera's forward axis lies in [0, pi]; the signed ground-plane facing
angle lies in [0, 2*pi), measured from ground +x toward ground +y.  The
front/back ambiguity of the plane normal is resolved by comparing the
shoulders' ground-x coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormalError, InsufficientKeypointsError
from .geometry import person_position
from .skeleton import LEFT_SHOULDER, RIGHT_SHOULDER, Keypoint3D, PersonState

TWO_PI = 2.0 * math.pi

# Relative eigenvalue gap below which the closed-form eigenvector
# extraction is abandoned for Jacobi sweeps.
DEGENERATE_GAP = 1e-6

MIN_PLANE_KEYPOINTS = 4


@dataclass(frozen=True)
class BodyPlane:
    """Least-squares plane through a person's keypoints.

    ``eigenvalues`` are in descending order; ``eigenvectors`` holds the
    matching unit vectors as columns.  ``normal`` is the third column: the
    direction of least spread, i.e. the plane normal.
    """

    centroid: tuple[float, float, float]
    eigenvalues: tuple[float, float, float]
    eigenvectors: np.ndarray
    normal: tuple[float, float, float]


def center_keypoints(points) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the mean from an (n, 3) keypoint array.

    Returns (centered, mean).  Requires n >= 4; a plane fit over fewer
    points is ill-conditioned.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < MIN_PLANE_KEYPOINTS:
        raise InsufficientKeypointsError(
            f"{pts.shape[0]} keypoints, need at least {MIN_PLANE_KEYPOINTS}"
        )
    mean = pts.mean(axis=0)
    return pts - mean, mean


def covariance(centered: np.ndarray) -> np.ndarray:
    """Covariance (1/n) M^T M of mean-centered rows, symmetrized exactly."""
    m = np.asarray(centered, dtype=np.float64)
    c = m.T @ m / m.shape[0]
    return 0.5 * (c + c.T)


def _jacobi_sym3(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of one symmetric 3x3 matrix."""
    a = a.copy()
    v = np.eye(3)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(50):
        off = math.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off <= 1e-15 * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            if abs(apq) <= 1e-300:
                continue
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            v = v @ rot
    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues)[::-1]
    return eigenvalues[order], v[:, order]


def _sym3_eigenvalues_vec(a00, a01, a02, a11, a12, a22):
    """Vectorized trigonometric eigenvalues of symmetric 3x3 component arrays.

    Returns (lam1, lam2, lam3, isotropic) with lam1 >= lam2 >= lam3;
    ``isotropic`` marks scalar multiples of the identity, whose eigenvalues
    are all the diagonal mean.
    """
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    q = (a00 + a11 + a22) / 3.0
    d0, d1, d2 = a00 - q, a11 - q, a22 - q
    p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2 / 6.0, 0.0))
    isotropic = p <= 1e-300
    ps = np.where(isotropic, 1.0, p)
    b00, b11, b22 = d0 / ps, d1 / ps, d2 / ps
    b01, b02, b12 = a01 / ps, a02 / ps, a12 / ps
    det_b = (
        b00 * (b11 * b22 - b12 * b12)
        - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02)
    )
    phi = np.arccos(np.clip(det_b / 2.0, -1.0, 1.0)) / 3.0
    lam1 = q + 2.0 * p * np.cos(phi)
    lam3 = q + 2.0 * p * np.cos(phi + 2.0 * math.pi / 3.0)
    lam2 = 3.0 * q - lam1 - lam3
    lam1 = np.where(isotropic, q, lam1)
    lam2 = np.where(isotropic, q, lam2)
    lam3 = np.where(isotropic, q, lam3)
    return lam1, lam2, lam3, isotropic


def _batch_nullvec(a00, a01, a02, a11, a12, a22, lam):
    """Null direction of (A - lam*I) per matrix via the best row cross.

    Component-wise twin of _scalar_nullvec; returns unnormalized
    (vx, vy, vz, norm_squared) arrays.
    """
    b00, b11, b22 = a00 - lam, a11 - lam, a22 - lam
    c0x = a01 * a12 - a02 * b11
    c0y = a02 * a01 - b00 * a12
    c0z = b00 * b11 - a01 * a01
    n0 = c0x * c0x + c0y * c0y + c0z * c0z
    c1x = a01 * b22 - a02 * a12
    c1y = a02 * a02 - b00 * b22
    c1z = b00 * a12 - a01 * a02
    n1 = c1x * c1x + c1y * c1y + c1z * c1z
    c2x = b11 * b22 - a12 * a12
    c2y = a02 * a12 - a01 * b22
    c2z = a01 * a12 - a02 * b11
    n2 = c2x * c2x + c2y * c2y + c2z * c2z
    pick0 = n0 >= n1
    vx = np.where(pick0, c0x, c1x)
    vy = np.where(pick0, c0y, c1y)
    vz = np.where(pick0, c0z, c1z)
    nb = np.where(pick0, n0, n1)
    pick2 = n2 > nb
    vx = np.where(pick2, c2x, vx)
    vy = np.where(pick2, c2y, vy)
    vz = np.where(pick2, c2z, vz)
    nb = np.where(pick2, n2, nb)
    return vx, vy, vz, nb


def plane_normals_batch(a00, a01, a02, a11, a12, a22):
    """Eigenvalues and least-variance directions for covariance batches.

    Takes the six unique covariance components as (n,) arrays and returns
    (lam1, lam2, lam3, v3x, v3y, v3z) arrays; the v3 direction is
    unnormalized (callers using only its direction need no unit length).
    Degenerate rows fall back to the scalar path.
    """
    lam1, lam2, lam3, isotropic = _sym3_eigenvalues_vec(a00, a01, a02, a11, a12, a22)
    v3x, v3y, v3z, n3 = _batch_nullvec(a00, a01, a02, a11, a12, a22, lam3)
    scale = np.maximum(np.maximum(np.abs(lam1), np.abs(lam3)), 1e-300)
    gap = np.minimum(lam1 - lam2, lam2 - lam3)
    floor = 1e-24 * scale**4
    bad = isotropic | (gap < DEGENERATE_GAP * scale) | (n3 <= floor)
    if bad.any():
        for i in bad.nonzero()[0]:
            values, vectors = eigendecompose_sym3_scalar(
                float(a00[i]), float(a01[i]), float(a02[i]),
                float(a11[i]), float(a12[i]), float(a22[i]),
            )
            lam1[i], lam2[i], lam3[i] = values
            v3x[i], v3y[i], v3z[i] = vectors[2]
    return lam1, lam2, lam3, v3x, v3y, v3z


def _scalar_nullvec(
    a00: float, a01: float, a02: float, a11: float, a12: float, a22: float, lam: float
) -> tuple[float, float, float, float]:
    """Scalar twin of _eigvec_from_rows for one matrix; returns (x, y, z, norm^2)."""
    b00, b11, b22 = a00 - lam, a11 - lam, a22 - lam
    # rows of (A - lam*I): (b00, a01, a02), (a01, b11, a12), (a02, a12, b22)
    c0x = a01 * a12 - a02 * b11
    c0y = a02 * a01 - b00 * a12
    c0z = b00 * b11 - a01 * a01
    n0 = c0x * c0x + c0y * c0y + c0z * c0z
    c1x = a01 * b22 - a02 * a12
    c1y = a02 * a02 - b00 * b22
    c1z = b00 * a12 - a01 * a02
    n1 = c1x * c1x + c1y * c1y + c1z * c1z
    c2x = b11 * b22 - a12 * a12
    c2y = a02 * a12 - a01 * b22
    c2z = a01 * a12 - a02 * b11
    n2 = c2x * c2x + c2y * c2y + c2z * c2z
    if n0 >= n1 and n0 >= n2:
        return c0x, c0y, c0z, n0
    if n1 >= n2:
        return c1x, c1y, c1z, n1
    return c2x, c2y, c2z, n2


def eigendecompose_sym3_scalar(
    a00: float, a01: float, a02: float, a11: float, a12: float, a22: float
) -> tuple[tuple[float, float, float], tuple[tuple[float, float, float], ...]]:
    """Closed-form eigendecomposition of one symmetric 3x3 matrix.

    Same trigonometric method as the batched path, in plain floats for the
    per-frame hot loop.  Returns (eigenvalues descending, eigenvectors as
    row tuples v1, v2, v3 with deterministic signs).  Falls back to Jacobi
    sweeps for near-equal eigenvalues.
    """
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    q = (a00 + a11 + a22) / 3.0
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    if p2 <= 0.0 or p2 / 6.0 <= 1e-300:
        return (q, q, q), ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    p = math.sqrt(p2 / 6.0)
    b00, b11, b22 = (a00 - q) / p, (a11 - q) / p, (a22 - q) / p
    b01, b02, b12 = a01 / p, a02 / p, a12 / p
    det_b = (
        b00 * (b11 * b22 - b12 * b12)
        - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02)
    )
    phi = math.acos(min(1.0, max(-1.0, det_b / 2.0))) / 3.0
    lam1 = q + 2.0 * p * math.cos(phi)
    lam3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    lam2 = 3.0 * q - lam1 - lam3

    scale = max(abs(lam1), abs(lam3), 1e-300)
    v1x, v1y, v1z, n1 = _scalar_nullvec(a00, a01, a02, a11, a12, a22, lam1)
    v3x, v3y, v3z, n3 = _scalar_nullvec(a00, a01, a02, a11, a12, a22, lam3)
    floor = 1e-24 * scale**4  # squared norms of cross products scale as eigengap^2
    if min(lam1 - lam2, lam2 - lam3) < DEGENERATE_GAP * scale or n1 <= floor or n3 <= floor:
        values, vectors = _jacobi_sym3(
            np.array([[a00, a01, a02], [a01, a11, a12], [a02, a12, a22]])
        )
        vecs = _canonical_columns(vectors)
        return (float(values[0]), float(values[1]), float(values[2])), vecs

    inv1 = 1.0 / math.sqrt(n1)
    v1x, v1y, v1z = v1x * inv1, v1y * inv1, v1z * inv1
    dot = v3x * v1x + v3y * v1y + v3z * v1z
    v3x, v3y, v3z = v3x - dot * v1x, v3y - dot * v1y, v3z - dot * v1z
    inv3 = 1.0 / math.sqrt(v3x * v3x + v3y * v3y + v3z * v3z)
    v3x, v3y, v3z = v3x * inv3, v3y * inv3, v3z * inv3
    v2x = v3y * v1z - v3z * v1y
    v2y = v3z * v1x - v3x * v1z
    v2z = v3x * v1y - v3y * v1x

    def fix_sign(x, y, z):
        ax, ay, az = abs(x), abs(y), abs(z)
        if ax >= ay and ax >= az:
            pick = x
        elif ay >= az:
            pick = y
        else:
            pick = z
        return (-x, -y, -z) if pick < 0.0 else (x, y, z)

    return (lam1, lam2, lam3), (
        fix_sign(v1x, v1y, v1z),
        fix_sign(v2x, v2y, v2z),
        fix_sign(v3x, v3y, v3z),
    )


def _canonical_columns(vectors: np.ndarray) -> tuple[tuple[float, float, float], ...]:
    """Columns of a 3x3 basis as sign-canonicalized row tuples."""
    out = []
    for col in range(3):
        x, y, z = float(vectors[0, col]), float(vectors[1, col]), float(vectors[2, col])
        ax, ay, az = abs(x), abs(y), abs(z)
        pick = x if (ax >= ay and ax >= az) else (y if ay >= az else z)
        out.append((-x, -y, -z) if pick < 0.0 else (x, y, z))
    return tuple(out)


def eigendecompose_sym3_batch(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a batch of symmetric 3x3 matrices.

    Args:
        mats: (n, 3, 3) symmetric matrices.

    Returns:
        (eigenvalues, eigenvectors): (n, 3) descending values and (n, 3, 3)
        orthonormal column bases with deterministic signs (largest-magnitude
        component of each column is positive).
    """
    a = np.asarray(mats, dtype=np.float64).reshape(-1, 3, 3)
    n = a.shape[0]
    if n == 1:
        m = a[0]
        vals, vecs = eigendecompose_sym3_scalar(
            float(m[0, 0]), float(m[0, 1]), float(m[0, 2]),
            float(m[1, 1]), float(m[1, 2]), float(m[2, 2]),
        )
        return np.array([vals]), np.array([vecs]).transpose(0, 2, 1)
    a00, a11, a22 = a[:, 0, 0].copy(), a[:, 1, 1].copy(), a[:, 2, 2].copy()
    a01, a02, a12 = a[:, 0, 1].copy(), a[:, 0, 2].copy(), a[:, 1, 2].copy()

    lam1, lam2, lam3, isotropic = _sym3_eigenvalues_vec(a00, a01, a02, a11, a12, a22)
    values = np.stack([lam1, lam2, lam3], axis=1)

    v1x, v1y, v1z, n1 = _batch_nullvec(a00, a01, a02, a11, a12, a22, lam1)
    v3x, v3y, v3z, n3 = _batch_nullvec(a00, a01, a02, a11, a12, a22, lam3)
    v1 = np.stack([v1x, v1y, v1z], axis=1)
    v3 = np.stack([v3x, v3y, v3z], axis=1)

    scale = np.maximum(np.abs(values).max(axis=1), 1e-300)
    gap = np.minimum(lam1 - lam2, lam2 - lam3) / scale
    floor = 1e-24 * scale**4
    fallback = (~isotropic) & ((gap < DEGENERATE_GAP) | (n1 <= floor) | (n3 <= floor))

    with np.errstate(invalid="ignore", divide="ignore"):
        v1 = v1 / np.where(n1[:, None] > 0.0, np.sqrt(n1)[:, None], 1.0)
        v3 = v3 - (v3 * v1).sum(axis=1, keepdims=True) * v1
        v3n = np.sqrt((v3 * v3).sum(axis=1, keepdims=True))
        v3 = v3 / np.where(v3n > 0.0, v3n, 1.0)
    v2 = np.cross(v3, v1)
    vectors = np.stack([v1, v2, v3], axis=2)

    identity_rows = isotropic.nonzero()[0]
    if identity_rows.size:
        vectors[identity_rows] = np.eye(3)
    for i in fallback.nonzero()[0]:
        values[i], vectors[i] = _jacobi_sym3(a[i])

    # Deterministic sign: largest-magnitude component of each column positive.
    comp = np.abs(vectors).argmax(axis=1)
    cols = np.arange(3)
    picked = vectors[np.arange(n)[:, None], comp, cols]
    vectors *= np.where(picked < 0.0, -1.0, 1.0)[:, None, :]
    return values, vectors


def eigendecompose_sym3(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose one symmetric 3x3 matrix (descending eigenvalues).

    Raises ValueError for an asymmetric input: symmetry is part of the
    contract, not something repaired silently.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got {c.shape}")
    scale = max(float(np.abs(c).max()), 1.0)
    if float(np.abs(c - c.T).max()) > 1e-9 * scale:
        raise ValueError("matrix is not symmetric")
    values, vectors = eigendecompose_sym3_batch(c[None])
    return values[0], vectors[0]


def fit_body_plane(points) -> BodyPlane:
    """Fit the least-squares plane through >= 4 keypoints."""
    centered, mean = center_keypoints(points)
    values, vectors = eigendecompose_sym3(covariance(centered))
    values = np.maximum(values, 0.0)  # covariance is PSD up to rounding
    normal = vectors[:, 2]
    return BodyPlane(
        centroid=(float(mean[0]), float(mean[1]), float(mean[2])),
        eigenvalues=(float(values[0]), float(values[1]), float(values[2])),
        eigenvectors=vectors,
        normal=(float(normal[0]), float(normal[1]), float(normal[2])),
    )


def facing_angle(normal, camera_normal) -> float:
    """Unsigned angle in [0, pi] between a body normal and the camera axis."""
    n = np.asarray(normal, dtype=np.float64)
    c = np.asarray(camera_normal, dtype=np.float64)
    nn = float(np.linalg.norm(n))
    nc = float(np.linalg.norm(c))
    if nn <= 0.0 or nc <= 0.0:
        raise DegenerateNormalError("zero-length vector has no facing angle")
    return math.acos(min(1.0, max(-1.0, float(n @ c) / (nn * nc))))


def disambiguate_facing(
    theta: float, left_shoulder: Keypoint3D | None, right_shoulder: Keypoint3D | None
) -> float:
    """Resolve front/back by comparing shoulder ground-x coordinates.

    Adds pi when the right shoulder sits at larger ground x (farther from
    the camera) than the left one.  With a shoulder missing the input angle
    is returned unchanged; callers should flag the state as low confidence.
    """
    if left_shoulder is None or right_shoulder is None:
        return theta % TWO_PI
    if right_shoulder.world_xy[0] > left_shoulder.world_xy[0]:
        theta = theta + math.pi
    return theta % TWO_PI


def _canonical_ground_normal(
    normal,
    shoulder_facing: tuple[float, float] | None,
    camera_normal,
) -> tuple[float, float]:
    """Project the plane normal to the ground and fix its sign.

    The representative with nonnegative ground-y is chosen so the planar
    angle lands in [0, pi], mirroring the unsigned-angle range; the
    shoulder-implied facing breaks the tie when the lateral component
    vanishes, and the camera axis does when shoulders are missing too.
    """
    nx, ny, nz = float(normal[0]), float(normal[1]), float(normal[2])
    wx, wy = nz, nx
    planar = math.hypot(wx, wy)
    if planar <= 1e-12 * max(math.sqrt(nx * nx + ny * ny + nz * nz), 1e-300):
        raise DegenerateNormalError("body normal is vertical; no ground-plane facing")
    if abs(wy) > 1e-9 * planar:
        if wy < 0.0:
            wx, wy = -wx, -wy
    elif shoulder_facing is not None:
        if wx * shoulder_facing[0] + wy * shoulder_facing[1] < 0.0:
            wx, wy = -wx, -wy
    else:
        cx, cy, cz = float(camera_normal[0]), float(camera_normal[1]), float(camera_normal[2])
        if nx * cx + ny * cy + nz * cz > 0.0:
            wx, wy = -wx, -wy
    return wx, wy


def facing_from_plane(
    eigenvalues: tuple[float, float, float],
    normal,
    accepted: list[Keypoint3D],
    camera_normal,
) -> tuple[float, float, bool]:
    """Signed ground-plane facing from a fitted body plane.

    Returns (theta, orientation_confidence, shoulder_fallback).  Raises
    DegenerateNormalError for nearly collinear keypoint sets (no plane) or
    a horizontal body plane (no ground facing).
    """
    lam1, lam2, lam3 = eigenvalues
    if lam2 <= 1e-10 * max(lam1, 1e-300):
        raise DegenerateNormalError("keypoints nearly collinear; body plane undefined")

    left = right = None
    for kp in accepted:
        if kp.index == LEFT_SHOULDER:
            left = kp
        elif kp.index == RIGHT_SHOULDER:
            right = kp
    shoulder_facing = None
    if left is not None and right is not None:
        dx = right.world_xy[0] - left.world_xy[0]
        dy = right.world_xy[1] - left.world_xy[1]
        if dx != 0.0 or dy != 0.0:
            shoulder_facing = (dy, -dx)

    wx, wy = _canonical_ground_normal(normal, shoulder_facing, camera_normal)
    theta = disambiguate_facing(math.atan2(wy, wx), left, right)
    confidence = (lam2 - lam3) / (lam1 + 1e-12)
    return theta, confidence, left is None or right is None


def estimate_person_state(
    keypoints3d: list[Keypoint3D],
    confidences: list[float],
    camera_normal=(0.0, 0.0, 1.0),
    *,
    min_confidence: float = 0.3,
    min_valid: int = 4,
    person_id: int = 0,
) -> PersonState:
    """Estimate ground-plane position and facing angle for one person.

    Args:
        keypoints3d: lifted keypoints (depth was available for each).
        confidences: detector confidence per keypoint, parallel list.
        camera_normal: camera forward axis, used as the last-resort sign
            reference when shoulders are unavailable.

    Raises:
        InsufficientKeypointsError: fewer than ``min_valid`` accepted.
        DegenerateNormalError: keypoints nearly collinear or the body plane
            is horizontal, so no ground facing exists.
    """
    accepted = [kp for kp, c in zip(keypoints3d, confidences) if c >= min_confidence]
    accepted_conf = [c for c in confidences if c >= min_confidence]
    position = person_position(accepted, accepted_conf, 0.0, min_valid)

    plane = fit_body_plane(np.array([kp.camera_xyz for kp in accepted]))
    theta, confidence, fallback = facing_from_plane(
        plane.eigenvalues, plane.normal, accepted, camera_normal
    )
    return PersonState(
        person_id=person_id,
        position=position,
        theta=theta,
        keypoints3d=accepted,
        n_valid=len(accepted),
        orientation_confidence=confidence,
        shoulder_fallback=fallback,
    )
