"""Synthetic scenario generation with exact ground truth.

A scenario places planar 17-keypoint body templates at known ground-plane
poses, projects them through the camera model, and optionally perturbs
pixels and depths with Gaussian noise.  The emitted truth file carries the
exact poses, per-keypoint camera coordinates, expected group memberships,
and the groups' designed interest points, so recognition output can be
scored against it.

The ground frame puts the camera at the origin looking along +x; ground y
is the camera's lateral axis.  Facing angles are measured from +x toward
+y.  Body templates are vertical planes: at zero noise the plane-fit
normal equals the facing direction exactly.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import CameraCalibration, default_d435i_calibration
from .frames import FrameRecord
from .skeleton import NUM_KEYPOINTS, Keypoint2D

# (lateral offset toward the person's left, height) per keypoint, meters.
# Shoulder span 0.40 m, hip span 0.30 m, ~1.70 m tall; offsets sum to zero
# so the template's ground centroid is exactly the person position.
BODY_TEMPLATE = (
    (0.00, 1.62),  # nose
    (0.03, 1.66),  # left_eye
    (-0.03, 1.66),  # right_eye
    (0.07, 1.62),  # left_ear
    (-0.07, 1.62),  # right_ear
    (0.20, 1.45),  # left_shoulder
    (-0.20, 1.45),  # right_shoulder
    (0.26, 1.15),  # left_elbow
    (-0.26, 1.15),  # right_elbow
    (0.28, 0.88),  # left_wrist
    (-0.28, 0.88),  # right_wrist
    (0.15, 1.00),  # left_hip
    (-0.15, 1.00),  # right_hip
    (0.16, 0.53),  # left_knee
    (-0.16, 0.53),  # right_knee
    (0.17, 0.08),  # left_ankle
    (-0.17, 0.08),  # right_ankle
)

MIN_CAMERA_RANGE = 0.05  # meters; closer keypoints count as behind the camera


@dataclass(frozen=True)
class PersonSpec:
    """Ground-truth pose of one synthetic person."""

    x: float
    y: float
    theta: float
    occluded: tuple[int, ...] = ()
    allow_out_of_view: bool = False


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    persons: tuple[PersonSpec, ...]
    expected_groups: tuple[tuple[int, ...], ...] = ()
    interest_points: tuple[tuple[float, float], ...] = ()
    zone_areas: tuple[float, ...] = ()
    camera_height: float = 0.9
    sigma_px: float = 0.0
    sigma_depth: float = 0.0
    seed: int = 0
    n_frames: int = 1
    fps: float = 30.0

    def __post_init__(self):
        if self.sigma_px < 0 or self.sigma_depth < 0:
            raise ValueError("noise sigmas must be nonnegative")
        if self.n_frames < 0:
            raise ValueError("n_frames must be nonnegative")
        if len(self.interest_points) not in (0, len(self.expected_groups)):
            raise ValueError("interest_points must match expected_groups")
        if len(self.zone_areas) not in (0, len(self.expected_groups)):
            raise ValueError("zone_areas must match expected_groups")

    def with_overrides(self, **kwargs) -> "ScenarioSpec":
        return dataclasses.replace(self, **kwargs)


@dataclass
class TruthPerson:
    person_id: int
    x: float
    y: float
    theta: float
    keypoints_camera: np.ndarray  # (17, 3)
    out_of_view: bool = False


@dataclass
class ScenarioTruth:
    scenario: str
    persons: list[TruthPerson]
    groups: list[tuple[int, ...]]
    interest_points: list[tuple[float, float]]
    zone_areas: list[float]
    frame_ids: list[int]


def template_keypoints_camera(person: PersonSpec, camera_height: float) -> np.ndarray:
    """Exact camera-frame coordinates of the 17 template keypoints."""
    sin_t, cos_t = math.sin(person.theta), math.cos(person.theta)
    out = np.empty((NUM_KEYPOINTS, 3))
    for k, (lateral, height) in enumerate(BODY_TEMPLATE):
        gx = person.x + lateral * sin_t
        gy = person.y - lateral * cos_t
        out[k] = (gy, camera_height - height, gx)  # camera x right, y down, z forward
    return out


def synthesize_scenario(
    spec: ScenarioSpec, calibration: CameraCalibration | None = None
) -> tuple[list[FrameRecord], ScenarioTruth]:
    """Generate noisy keypoint frames plus exact truth for a scenario.

    Persons behind the camera are kept in the truth, flagged out of view,
    and omitted from frames; keypoints whose true projection falls outside
    the color image get confidence 0 (undetectable).  Output is
    deterministic for a fixed (spec, seed).

    Raises ValueError when a person is out of view without being flagged
    ``allow_out_of_view``.
    """
    calib = calibration if calibration is not None else default_d435i_calibration()
    cw, chh = calib.color_size
    k = calib.color_intrinsics
    fx, fy, cx, cy = k[0, 0], k[1, 1], k[0, 2], k[1, 2]

    truth_persons: list[TruthPerson] = []
    visible: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]] = []
    for pid, person in enumerate(spec.persons):
        xyz = template_keypoints_camera(person, spec.camera_height)
        behind = bool(np.any(xyz[:, 2] <= MIN_CAMERA_RANGE))
        if behind:
            if not person.allow_out_of_view:
                raise ValueError(f"person {pid} is behind the camera; flag allow_out_of_view")
            truth_persons.append(
                TruthPerson(pid, person.x, person.y, person.theta % (2 * math.pi), xyz, True)
            )
            continue
        u = fx * xyz[:, 0] / xyz[:, 2] + cx
        v = fy * xyz[:, 1] / xyz[:, 2] + cy
        in_bounds = (u >= 0) & (u <= cw - 1) & (v >= 0) & (v <= chh - 1)
        if not in_bounds.all() and not person.allow_out_of_view:
            raise ValueError(
                f"person {pid} has keypoints outside the color frame; flag allow_out_of_view"
            )
        conf = np.where(in_bounds, 1.0, 0.0)
        conf[list(person.occluded)] = 0.0
        truth_persons.append(
            TruthPerson(pid, person.x, person.y, person.theta % (2 * math.pi), xyz, False)
        )
        visible.append((pid, np.stack([u, v], axis=1), xyz[:, 2].copy(), conf))

    rng = np.random.default_rng(spec.seed)
    frames: list[FrameRecord] = []
    for f in range(spec.n_frames):
        persons_out: list[list[Keypoint2D]] = []
        for _, uv, depth, conf in visible:
            if spec.sigma_px > 0.0:
                uv_noisy = uv + rng.normal(0.0, spec.sigma_px, uv.shape)
            else:
                uv_noisy = uv
            if spec.sigma_depth > 0.0:
                d_noisy = np.maximum(depth + rng.normal(0.0, spec.sigma_depth, depth.shape), 1e-3)
            else:
                d_noisy = depth
            persons_out.append(
                [
                    Keypoint2D(
                        index=kp,
                        u=float(uv_noisy[kp, 0]),
                        v=float(uv_noisy[kp, 1]),
                        depth=float(d_noisy[kp]),
                        confidence=float(conf[kp]),
                    )
                    for kp in range(NUM_KEYPOINTS)
                ]
            )
        frames.append(FrameRecord(frame_id=f, timestamp=f / spec.fps, persons=persons_out))

    truth = ScenarioTruth(
        scenario=spec.name,
        persons=truth_persons,
        groups=[tuple(g) for g in spec.expected_groups],
        interest_points=[tuple(p) for p in spec.interest_points],
        zone_areas=list(spec.zone_areas),
        frame_ids=list(range(spec.n_frames)),
    )
    return frames, truth


def _arc_formation(
    name: str,
    focus: tuple[float, float],
    radius: float,
    angles_deg: tuple[float, ...],
) -> ScenarioSpec:
    """Persons on an arc around a shared focus, each facing the focus.

    Every facing ray passes exactly through the focus, so the designed
    interaction zone degenerates to that point: interest point = focus,
    zone area = 0.
    """
    persons = []
    for a_deg in angles_deg:
        a = math.radians(a_deg)
        px = focus[0] + radius * math.cos(a)
        py = focus[1] + radius * math.sin(a)
        persons.append(PersonSpec(x=px, y=py, theta=(a + math.pi) % (2 * math.pi)))
    ids = tuple(range(len(persons)))
    return ScenarioSpec(
        name=name,
        persons=tuple(persons),
        expected_groups=(ids,),
        interest_points=(focus,),
        zone_areas=(0.0,),
    )


def builtin_scenarios() -> tuple[ScenarioSpec, ...]:
    """The five reference formations.

    S1: a pair 0.8 m apart facing each other; S2: three persons in a
    semicircle around a shared focus; S3: an equilateral triangle facing
    its center; S4: four persons in a semicircle; S5: four persons in a
    circle.  Facing directions all keep a clear lateral component, away
    from the front/back comparison's blind axis.
    """
    s1 = ScenarioSpec(
        name="S1",
        persons=(
            PersonSpec(x=3.0, y=-0.4, theta=math.pi / 2),
            PersonSpec(x=3.0, y=0.4, theta=3 * math.pi / 2),
        ),
        expected_groups=((0, 1),),
        interest_points=((3.0, 0.0),),
        zone_areas=(0.0,),
    )
    s2 = _arc_formation("S2", focus=(2.2, 0.1), radius=1.0, angles_deg=(-50.0, 15.0, 55.0))
    s3 = _arc_formation(
        "S3", focus=(3.0, 0.3), radius=1.2 / math.sqrt(3.0), angles_deg=(90.0, 210.0, 330.0)
    )
    s4 = _arc_formation(
        "S4", focus=(2.4, -0.3), radius=1.1, angles_deg=(-55.0, -18.0, 18.0, 55.0)
    )
    s5 = _arc_formation("S5", focus=(3.2, 0.2), radius=0.9, angles_deg=(45.0, 135.0, 225.0, 315.0))
    return (s1, s2, s3, s4, s5)


def get_scenario(name: str) -> ScenarioSpec:
    for spec in builtin_scenarios():
        if spec.name.lower() == name.lower():
            return spec
    raise KeyError(f"unknown scenario {name!r}")


def load_scenario_spec(path: str | Path) -> ScenarioSpec:
    """Load a scenario spec from a JSON document (see README for schema)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    persons = tuple(
        PersonSpec(
            x=float(p["x"]),
            y=float(p["y"]),
            theta=float(p["theta"]),
            occluded=tuple(int(i) for i in p.get("occluded", ())),
            allow_out_of_view=bool(p.get("allow_out_of_view", False)),
        )
        for p in doc["persons"]
    )
    return ScenarioSpec(
        name=str(doc.get("name", Path(path).stem)),
        persons=persons,
        expected_groups=tuple(tuple(int(i) for i in g) for g in doc.get("expected_groups", ())),
        interest_points=tuple(
            (float(p[0]), float(p[1])) for p in doc.get("interest_points", ())
        ),
        zone_areas=tuple(float(a) for a in doc.get("zone_areas", ())),
        camera_height=float(doc.get("camera_height", 0.9)),
        sigma_px=float(doc.get("sigma_px", 0.0)),
        sigma_depth=float(doc.get("sigma_depth", 0.0)),
        seed=int(doc.get("seed", 0)),
        n_frames=int(doc.get("n_frames", 1)),
    )


def write_truth(truth: ScenarioTruth, path: str | Path) -> None:
    doc = {
        "scenario": truth.scenario,
        "persons": [
            {
                "id": p.person_id,
                "x": p.x,
                "y": p.y,
                "theta": p.theta,
                "out_of_view": p.out_of_view,
                "keypoints_camera": [[float(v) for v in row] for row in p.keypoints_camera],
            }
            for p in truth.persons
        ],
        "groups": [list(g) for g in truth.groups],
        "interest_points": [list(p) for p in truth.interest_points],
        "zone_areas": truth.zone_areas,
        "frame_ids": truth.frame_ids,
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def read_truth(path: str | Path) -> ScenarioTruth:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    persons = [
        TruthPerson(
            person_id=int(p["id"]),
            x=float(p["x"]),
            y=float(p["y"]),
            theta=float(p["theta"]),
            keypoints_camera=np.array(p["keypoints_camera"], dtype=np.float64),
            out_of_view=bool(p.get("out_of_view", False)),
        )
        for p in doc["persons"]
    ]
    return ScenarioTruth(
        scenario=str(doc.get("scenario", "")),
        persons=persons,
        groups=[tuple(int(i) for i in g) for g in doc.get("groups", [])],
        interest_points=[(float(p[0]), float(p[1])) for p in doc.get("interest_points", [])],
        zone_areas=[float(a) for a in doc.get("zone_areas", [])],
        frame_ids=[int(i) for i in doc.get("frame_ids", [])],
    )
