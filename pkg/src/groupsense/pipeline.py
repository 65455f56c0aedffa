"""Per-frame recognition pipeline: keypoints -> states -> groups -> costmap.

The localization and plane-fit work is batched across all persons in the
frame, which keeps the per-frame cost nearly independent of the person
count.  Stage wall-clock times are recorded on every call; they are cheap
(two clock reads per stage) and the benchmark command aggregates them.

Also defines the annotation record format written by the ``run`` command
and read back by ``eval``: one JSON object per frame mirroring
FrameResult.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .calibration import CameraCalibration
from .costmap import GridSpec, SocialCostmap, rasterize_groups
from .errors import DegenerateNormalError, FrameParseError
from .frames import FrameRecord
from .grouping import GroupingConfig, InteractionGroup, recognize_groups
from .orientation import facing_from_plane, plane_normals_batch
from .skeleton import Keypoint3D, PersonState


@dataclass(frozen=True)
class PipelineConfig:
    min_confidence: float = 0.3
    min_valid_keypoints: int = 4
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    camera_normal: tuple[float, float, float] = (0.0, 0.0, 1.0)
    inflation_radius: float = 0.5
    decay_rate: float = 3.0


@dataclass
class StageTimings:
    localization_ms: float = 0.0
    grouping_ms: float = 0.0
    costmap_ms: float = 0.0


@dataclass
class FrameResult:
    frame_id: int
    timestamp: float
    states: list[PersonState]
    groups: list[InteractionGroup]
    rejected_groups: list[InteractionGroup]
    noise_ids: list[int]
    dropped: list[tuple[int, str]]
    timings: StageTimings
    costmap: SocialCostmap | None = None


def localize_frame(
    frame: FrameRecord, calib: CameraCalibration, config: PipelineConfig
) -> tuple[list[PersonState], list[tuple[int, str]]]:
    """Lift all persons' keypoints to states in one batched pass.

    Returns (states, dropped) where ``dropped`` pairs a person index with
    the reason it produced no state this frame.
    """
    dropped: list[tuple[int, str]] = []
    if not frame.persons:
        return [], dropped

    u_arr, v_arr, d_arr, c_arr, kp_index, offsets = frame.keypoint_arrays()
    for p_idx in range(len(frame.persons)):
        if offsets[p_idx] == offsets[p_idx + 1]:
            dropped.append((p_idx, "0 accepted keypoints"))
    if u_arr.shape[0] == 0:
        return [], dropped
    k_inv = calib.color_intrinsics_inv
    # Inlined pinhole deprojection of (u, v, 1) scaled by depth; K is
    # upper-triangular so its inverse has no (1, 0) or (2, 0..1) terms.
    x_arr = (k_inv[0, 0] * u_arr + k_inv[0, 1] * v_arr + k_inv[0, 2]) * d_arr
    y_arr = (k_inv[1, 1] * v_arr + k_inv[1, 2]) * d_arr
    z_arr = d_arr

    # Accepted-keypoint moment sums per person in one reduceat pass; the
    # weights zero out low-confidence keypoints.
    w = (c_arr >= config.min_confidence).astype(np.float64)
    xw = x_arr * w
    yw = y_arr * w
    zw = z_arr * w
    moments = np.stack(
        [w, xw, yw, zw, xw * x_arr, xw * y_arr, xw * z_arr, yw * y_arr, yw * z_arr, zw * z_arr]
    )
    seg_person = [p for p in range(len(frame.persons)) if offsets[p] < offsets[p + 1]]
    starts = np.array([offsets[p] for p in seg_person])
    sums = np.add.reduceat(moments, starts, axis=1).T.tolist()

    x_list = x_arr.tolist()
    y_list = y_arr.tolist()
    z_list = z_arr.tolist()
    acc_list = w.tolist()

    candidates = []  # (person_index, lo, hi, n, mx, my, mz)
    cov_rows = []
    for s_idx, p_idx in enumerate(seg_person):
        cnt, sx, sy, sz, sxx, sxy, sxz, syy, syz, szz = sums[s_idx]
        n = int(cnt)
        if n < config.min_valid_keypoints:
            dropped.append((p_idx, f"{n} accepted keypoints"))
            continue
        mx, my, mz = sx / n, sy / n, sz / n
        cov_rows.append(
            (
                sxx / n - mx * mx,
                sxy / n - mx * my,
                sxz / n - mx * mz,
                syy / n - my * my,
                syz / n - my * mz,
                szz / n - mz * mz,
            )
        )
        candidates.append((p_idx, offsets[p_idx], offsets[p_idx + 1], n, mx, my, mz))
    if not candidates:
        return [], dropped

    comp = np.array(cov_rows)
    lam1, lam2, lam3, v3x, v3y, v3z = plane_normals_batch(
        comp[:, 0], comp[:, 1], comp[:, 2], comp[:, 3], comp[:, 4], comp[:, 5]
    )
    lam1 = lam1.tolist()
    lam2 = lam2.tolist()
    lam3 = lam3.tolist()
    v3x = v3x.tolist()
    v3y = v3y.tolist()
    v3z = v3z.tolist()

    states: list[PersonState] = []
    for i, (p_idx, lo, hi, n, mx, my, mz) in enumerate(candidates):
        accepted = [
            Keypoint3D(k, (x, y, z), (z, x))
            for k, x, y, z, a in zip(
                kp_index[lo:hi], x_list[lo:hi], y_list[lo:hi], z_list[lo:hi], acc_list[lo:hi]
            )
            if a
        ]
        try:
            theta, confidence, fallback = facing_from_plane(
                (max(lam1[i], 0.0), max(lam2[i], 0.0), max(lam3[i], 0.0)),
                (v3x[i], v3y[i], v3z[i]),
                accepted,
                config.camera_normal,
            )
        except DegenerateNormalError as exc:
            dropped.append((p_idx, str(exc)))
            continue
        states.append(
            PersonState(
                person_id=p_idx,
                position=(mz, mx),
                theta=theta,
                keypoints3d=accepted,
                n_valid=n,
                orientation_confidence=confidence,
                shoulder_fallback=fallback,
            )
        )
    return states, dropped


def process_frame(
    frame: FrameRecord,
    calib: CameraCalibration,
    config: PipelineConfig | None = None,
    grid: GridSpec | None = None,
) -> FrameResult:
    """Run the full pipeline on one frame.

    ``grid``: when given, interacting groups are rasterized into a costmap
    (timed as its own stage); pass None to skip rasterization.
    """
    if config is None:
        config = PipelineConfig()
    t0 = time.perf_counter()
    states, dropped = localize_frame(frame, calib, config)
    t1 = time.perf_counter()
    groups, diagnostics = recognize_groups(states, config.grouping)
    t2 = time.perf_counter()
    costmap = None
    if grid is not None:
        costmap = rasterize_groups(groups, grid, config.inflation_radius, config.decay_rate)
    t3 = time.perf_counter()
    return FrameResult(
        frame_id=frame.frame_id,
        timestamp=frame.timestamp,
        states=states,
        groups=groups,
        rejected_groups=diagnostics.rejected,
        noise_ids=diagnostics.noise_ids,
        dropped=dropped,
        timings=StageTimings(
            localization_ms=(t1 - t0) * 1e3,
            grouping_ms=(t2 - t1) * 1e3,
            costmap_ms=(t3 - t2) * 1e3,
        ),
        costmap=costmap,
    )


def _group_to_dict(group: InteractionGroup) -> dict:
    return {
        "members": list(group.member_ids),
        "polygon": [[x, y] for x, y in group.polygon],
        "area": group.area,
        "centroid": list(group.centroid) if group.centroid is not None else None,
        "dispersion": group.dispersion,
        "interacting": group.interacting,
        "removed": list(group.removed_ids),
        "member_positions": [[x, y] for x, y in group.member_positions],
    }


def _group_from_dict(doc: dict) -> InteractionGroup:
    return InteractionGroup(
        member_ids=tuple(doc["members"]),
        polygon=tuple((float(x), float(y)) for x, y in doc["polygon"]),
        area=float(doc["area"]),
        centroid=tuple(doc["centroid"]) if doc.get("centroid") is not None else None,
        dispersion=doc.get("dispersion"),
        interacting=int(doc["interacting"]),
        removed_ids=tuple(doc.get("removed", ())),
        member_positions=tuple((float(x), float(y)) for x, y in doc.get("member_positions", ())),
    )


def result_to_json(result: FrameResult) -> str:
    """Serialize one frame's annotation record (deterministic field order)."""
    doc = {
        "frame_id": result.frame_id,
        "timestamp": result.timestamp,
        "persons": [
            {
                "id": s.person_id,
                "x": s.position[0],
                "y": s.position[1],
                "theta": s.theta,
                "n_valid": s.n_valid,
                "orientation_confidence": s.orientation_confidence,
                "shoulder_fallback": s.shoulder_fallback,
                "keypoints": [
                    [kp.index, kp.camera_xyz[0], kp.camera_xyz[1], kp.camera_xyz[2]]
                    for kp in s.keypoints3d
                ],
            }
            for s in result.states
        ],
        "groups": [_group_to_dict(g) for g in result.groups],
        "rejected_groups": [_group_to_dict(g) for g in result.rejected_groups],
        "noise": list(result.noise_ids),
        "dropped": [[idx, reason] for idx, reason in result.dropped],
    }
    return json.dumps(doc, separators=(",", ":"))


def write_annotations(results: Iterable[FrameResult], out: TextIO) -> None:
    for result in results:
        out.write(result_to_json(result))
        out.write("\n")


def parse_annotations(stream: Iterable[str] | str) -> list[FrameResult]:
    """Read annotation records back into FrameResult objects (timings zero)."""
    if isinstance(stream, str):
        stream = stream.splitlines()
    results = []
    for line_number, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FrameParseError(line_number, f"invalid JSON: {exc.msg}") from exc
        states = []
        for p in doc.get("persons", []):
            keypoints3d = [
                Keypoint3D(index=int(k[0]), camera_xyz=(k[1], k[2], k[3]), world_xy=(k[3], k[1]))
                for k in p.get("keypoints", [])
            ]
            states.append(
                PersonState(
                    person_id=int(p["id"]),
                    position=(float(p["x"]), float(p["y"])),
                    theta=float(p["theta"]),
                    keypoints3d=keypoints3d,
                    n_valid=int(p.get("n_valid", len(keypoints3d))),
                    orientation_confidence=float(p.get("orientation_confidence", 0.0)),
                    shoulder_fallback=bool(p.get("shoulder_fallback", False)),
                )
            )
        results.append(
            FrameResult(
                frame_id=int(doc["frame_id"]),
                timestamp=float(doc.get("timestamp", 0.0)),
                states=states,
                groups=[_group_from_dict(g) for g in doc.get("groups", [])],
                rejected_groups=[_group_from_dict(g) for g in doc.get("rejected_groups", [])],
                noise_ids=[int(i) for i in doc.get("noise", [])],
                dropped=[(int(i), str(r)) for i, r in doc.get("dropped", [])],
                timings=StageTimings(),
            )
        )
    return results
