"""Evaluation metrics: keypoint errors, scenario RMSE rows, stage timings.

Predicted persons are associated to truth persons by nearest neighbor on
ground-plane position with a 0.5 m gate.  Keypoint errors are Euclidean
distances in camera coordinates.  PE (percentage error) is defined here as
the mean of error over the truth keypoint's distance from the camera; it
is dimensionless and grows for distant extremities.  Facing-direction
errors are reported in degrees, wrapped to (-180, 180].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pipeline import FrameResult
from .scenarios import ScenarioTruth
from .skeleton import NUM_KEYPOINTS, PersonState

ASSOCIATION_GATE = 0.5  # meters


@dataclass
class KeypointErrorRow:
    index: int
    mae: float
    rmse: float
    pe: float
    count: int


@dataclass
class ScenarioErrors:
    """RMSE per quantity across frames; angles in degrees.

    ``detection_failures`` counts frames whose recognized grouping did not
    match the expected memberships; their zone quantities are excluded
    from the zone RMSE values but position/facing errors still accrue.
    """

    iza: float = 0.0
    ipx: float = 0.0
    ipy: float = 0.0
    hpx: float = 0.0
    hpy: float = 0.0
    hfd_deg: float = 0.0
    frames: int = 0
    detection_failures: int = 0
    persons_matched: int = 0
    persons_missed: int = 0


@dataclass
class StageStats:
    stage: str
    mean_ms: float
    p95_ms: float
    count: int


@dataclass
class StageTimingReport:
    stages: list[StageStats] = field(default_factory=list)
    warmup_skipped: int = 0


def wrap_angle_deg(delta_deg: float) -> float:
    """Wrap an angular difference in degrees to (-180, 180]."""
    wrapped = math.fmod(delta_deg, 360.0)
    if wrapped > 180.0:
        wrapped -= 360.0
    elif wrapped <= -180.0:
        wrapped += 360.0
    return wrapped


def _rmse(values: list[float]) -> float:
    if not values:
        return 0.0
    return math.sqrt(sum(v * v for v in values) / len(values))


def match_persons(
    states: list[PersonState], truth: ScenarioTruth, gate: float = ASSOCIATION_GATE
) -> list[tuple[PersonState, object]]:
    """Greedy one-to-one nearest-neighbor association within ``gate`` meters."""
    candidates = []
    for state in states:
        for person in truth.persons:
            if person.out_of_view:
                continue
            d = math.hypot(state.position[0] - person.x, state.position[1] - person.y)
            if d <= gate:
                candidates.append((d, state.person_id, person.person_id, state, person))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    used_states: set[int] = set()
    used_truth: set[int] = set()
    pairs = []
    for _, sid, tid, state, person in candidates:
        if sid in used_states or tid in used_truth:
            continue
        used_states.add(sid)
        used_truth.add(tid)
        pairs.append((state, person))
    return pairs


def keypoint_errors(
    results: list[FrameResult], truth: ScenarioTruth, gate: float = ASSOCIATION_GATE
) -> list[KeypointErrorRow]:
    """Per-keypoint MAE/RMSE/PE over all matched persons and frames.

    Returns up to 17 rows (indices with no samples are omitted), followed
    by an aggregate row with index -1 when any samples exist.
    """
    abs_err: list[list[float]] = [[] for _ in range(NUM_KEYPOINTS)]
    rel_err: list[list[float]] = [[] for _ in range(NUM_KEYPOINTS)]
    for result in results:
        for state, person in match_persons(result.states, truth, gate):
            for kp in state.keypoints3d:
                ref = person.keypoints_camera[kp.index]
                e = math.sqrt(
                    (kp.camera_xyz[0] - ref[0]) ** 2
                    + (kp.camera_xyz[1] - ref[1]) ** 2
                    + (kp.camera_xyz[2] - ref[2]) ** 2
                )
                abs_err[kp.index].append(e)
                rng = float(np.linalg.norm(ref))
                rel_err[kp.index].append(e / rng if rng > 0 else 0.0)
    rows = []
    for index in range(NUM_KEYPOINTS):
        errs = abs_err[index]
        if not errs:
            continue
        rows.append(
            KeypointErrorRow(
                index=index,
                mae=sum(errs) / len(errs),
                rmse=_rmse(errs),
                pe=sum(rel_err[index]) / len(errs),
                count=len(errs),
            )
        )
    all_abs = [e for errs in abs_err for e in errs]
    all_rel = [e for errs in rel_err for e in errs]
    if all_abs:
        rows.append(
            KeypointErrorRow(
                index=-1,
                mae=sum(all_abs) / len(all_abs),
                rmse=_rmse(all_abs),
                pe=sum(all_rel) / len(all_rel),
                count=len(all_abs),
            )
        )
    return rows


def _groups_match(result_groups, truth_groups) -> list[tuple] | None:
    """Pair recognized groups with truth groups by identical member sets.

    Returns (group, truth_index) pairs, or None when the groupings differ.
    """
    if len(result_groups) != len(truth_groups):
        return None
    remaining = set(range(len(truth_groups)))
    pairs = []
    for group in result_groups:
        members = frozenset(group.member_ids)
        hit = next((i for i in remaining if frozenset(truth_groups[i]) == members), None)
        if hit is None:
            return None
        remaining.discard(hit)
        pairs.append((group, hit))
    return pairs


def scenario_errors(
    results: list[FrameResult], truth: ScenarioTruth, gate: float = ASSOCIATION_GATE
) -> ScenarioErrors:
    """Scenario-level RMSE row over zone area, interest point, pose, facing."""
    iza: list[float] = []
    ipx: list[float] = []
    ipy: list[float] = []
    hpx: list[float] = []
    hpy: list[float] = []
    hfd: list[float] = []
    report = ScenarioErrors(frames=len(results))
    in_view = sum(1 for p in truth.persons if not p.out_of_view)
    for result in results:
        pairs = match_persons(result.states, truth, gate)
        report.persons_matched += len(pairs)
        report.persons_missed += max(in_view - len(pairs), 0)
        for state, person in pairs:
            hpx.append(state.position[0] - person.x)
            hpy.append(state.position[1] - person.y)
            hfd.append(wrap_angle_deg(math.degrees(state.theta - person.theta)))
        matched_groups = _groups_match(result.groups, truth.groups)
        if matched_groups is None:
            report.detection_failures += 1
            continue
        for group, truth_idx in matched_groups:
            if truth.zone_areas:
                iza.append(group.area - truth.zone_areas[truth_idx])
            if truth.interest_points and group.centroid is not None:
                ref = truth.interest_points[truth_idx]
                ipx.append(group.centroid[0] - ref[0])
                ipy.append(group.centroid[1] - ref[1])
    report.iza = _rmse(iza)
    report.ipx = _rmse(ipx)
    report.ipy = _rmse(ipy)
    report.hpx = _rmse(hpx)
    report.hpy = _rmse(hpy)
    report.hfd_deg = _rmse(hfd)
    return report


def time_stages(results: list[FrameResult], warmup: int = 0) -> StageTimingReport:
    """Aggregate per-stage wall-clock statistics, excluding warmup frames."""
    kept = results[warmup:]
    report = StageTimingReport(warmup_skipped=min(warmup, len(results)))
    if not kept:
        return report
    samples = {
        "localization": [r.timings.localization_ms for r in kept],
        "grouping": [r.timings.grouping_ms for r in kept],
        "costmap": [r.timings.costmap_ms for r in kept],
    }
    for stage, values in samples.items():
        arr = np.array(values)
        report.stages.append(
            StageStats(
                stage=stage,
                mean_ms=float(arr.mean()),
                p95_ms=float(np.percentile(arr, 95)),
                count=len(values),
            )
        )
    return report
