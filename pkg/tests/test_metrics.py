import math

import numpy as np
import pytest

from groupsense.grouping import InteractionGroup
from groupsense.metrics import (
    keypoint_errors,
    match_persons,
    scenario_errors,
    time_stages,
    wrap_angle_deg,
)
from groupsense.pipeline import FrameResult, StageTimings
from groupsense.scenarios import ScenarioTruth, TruthPerson
from groupsense.skeleton import Keypoint3D, PersonState


def truth_person(pid, x, y, theta, keypoints=None):
    if keypoints is None:
        keypoints = np.zeros((17, 3))
    return TruthPerson(person_id=pid, x=x, y=y, theta=theta, keypoints_camera=keypoints)


def make_truth(persons, groups=(), interest_points=(), zone_areas=(), frames=1):
    return ScenarioTruth(
        scenario="T",
        persons=persons,
        groups=[tuple(g) for g in groups],
        interest_points=[tuple(p) for p in interest_points],
        zone_areas=list(zone_areas),
        frame_ids=list(range(frames)),
    )


def state(pid, x, y, theta, keypoints3d=None):
    return PersonState(
        person_id=pid, position=(x, y), theta=theta, keypoints3d=keypoints3d or [], n_valid=17
    )


def result(frame_id, states, groups=()):
    return FrameResult(
        frame_id=frame_id,
        timestamp=0.0,
        states=states,
        groups=list(groups),
        rejected_groups=[],
        noise_ids=[],
        dropped=[],
        timings=StageTimings(),
    )


def group(members, centroid, area=0.0):
    return InteractionGroup(
        member_ids=tuple(members),
        polygon=(centroid,),
        area=area,
        centroid=centroid,
        dispersion=0.5,
        interacting=1,
    )


class TestWrap:
    def test_examples(self):
        assert wrap_angle_deg(359.0 - 1.0) == pytest.approx(-2.0)
        assert wrap_angle_deg(1.0 - 359.0) == pytest.approx(2.0)
        assert wrap_angle_deg(180.0) == 180.0
        assert wrap_angle_deg(-180.0) == 180.0
        assert wrap_angle_deg(720.0) == 0.0


class TestMatchPersons:
    def test_gate_excludes_distant(self):
        truth = make_truth([truth_person(0, 3.0, 0.0, 0.0)])
        pairs = match_persons([state(0, 3.1, 0.0, 0.0)], truth)
        assert len(pairs) == 1
        pairs = match_persons([state(0, 4.0, 0.0, 0.0)], truth)
        assert pairs == []

    def test_one_to_one_greedy(self):
        truth = make_truth([truth_person(0, 3.0, 0.0, 0.0), truth_person(1, 3.3, 0.0, 0.0)])
        states = [state(0, 3.01, 0.0, 0.0), state(1, 3.29, 0.0, 0.0)]
        pairs = match_persons(states, truth)
        assert {(s.person_id, t.person_id) for s, t in pairs} == {(0, 0), (1, 1)}


class TestKeypointErrors:
    def make_pair(self, offset):
        rng = np.random.default_rng(0)
        truth_kps = rng.uniform(-1, 1, size=(17, 3)) + np.array([0, 0, 3.0])
        kps = [
            Keypoint3D(index=i, camera_xyz=tuple(truth_kps[i] + offset), world_xy=(0, 0))
            for i in range(17)
        ]
        s = state(0, 3.0, 0.0, 0.0, keypoints3d=kps)
        t = truth_person(0, 3.0, 0.0, 0.0, keypoints=truth_kps)
        return result(0, [s]), make_truth([t])

    def test_exact_prediction_zero_errors(self):
        res, truth = self.make_pair(np.zeros(3))
        rows = keypoint_errors([res], truth)
        assert len(rows) == 18  # 17 keypoints + aggregate
        for row in rows:
            assert row.mae == 0.0 and row.rmse == 0.0 and row.pe == 0.0

    def test_constant_error_equalizes_mae_rmse(self):
        res, truth = self.make_pair(np.array([0.1, 0.0, 0.0]))
        rows = keypoint_errors([res], truth)
        for row in rows:
            assert row.mae == pytest.approx(0.1, abs=1e-12)
            assert row.rmse == pytest.approx(0.1, abs=1e-12)
            assert row.pe > 0

    def test_two_sample_arithmetic(self):
        truth_kps = np.zeros((17, 3))
        truth_kps[:, 2] = 1.0
        make = lambda e: Keypoint3D(index=0, camera_xyz=(e, 0.0, 1.0), world_xy=(1.0, e))
        s1 = state(0, 1.0, 0.0, 0.0, keypoints3d=[make(0.0)])
        s2 = state(0, 1.0, 0.0, 0.0, keypoints3d=[make(0.2)])
        t = truth_person(0, 1.0, 0.0, 0.0, keypoints=truth_kps)
        rows = keypoint_errors([result(0, [s1]), result(1, [s2])], make_truth([t], frames=2))
        row = rows[0]
        assert row.index == 0 and row.count == 2
        assert row.mae == pytest.approx(0.1)
        assert row.rmse == pytest.approx(math.sqrt(0.02))

    def test_rmse_at_least_mae_random(self):
        rng = np.random.default_rng(1)
        truth_kps = rng.uniform(-1, 1, size=(17, 3)) + np.array([0, 0, 3.0])
        kps = [
            Keypoint3D(
                index=i,
                camera_xyz=tuple(truth_kps[i] + rng.normal(0, 0.05, size=3)),
                world_xy=(0, 0),
            )
            for i in range(17)
        ]
        s = state(0, 3.0, 0.0, 0.0, keypoints3d=kps)
        t = truth_person(0, 3.0, 0.0, 0.0, keypoints=truth_kps)
        for row in keypoint_errors([result(0, [s])], make_truth([t])):
            assert row.rmse >= row.mae >= 0.0


class TestScenarioErrors:
    def test_perfect_run_all_zero(self):
        t = truth_person(0, 3.0, 0.5, 1.0)
        truth = make_truth([t], groups=[(0, 1)], interest_points=[(3.0, 0.0)], zone_areas=[0.0])
        truth.persons.append(truth_person(1, 3.0, -0.5, 2.0))
        res = result(
            0,
            [state(0, 3.0, 0.5, 1.0), state(1, 3.0, -0.5, 2.0)],
            groups=[group((0, 1), (3.0, 0.0), area=0.0)],
        )
        errors = scenario_errors([res], truth)
        assert errors.iza == errors.ipx == errors.ipy == 0.0
        assert errors.hpx == errors.hpy == errors.hfd_deg == 0.0
        assert errors.detection_failures == 0

    def test_constant_heading_bias(self):
        t = truth_person(0, 3.0, 0.0, 1.0)
        truth = make_truth([t], frames=5)
        results = [
            result(i, [state(0, 3.0, 0.0, 1.0 + math.radians(2.0))]) for i in range(5)
        ]
        errors = scenario_errors(results, truth)
        assert errors.hfd_deg == pytest.approx(2.0, abs=1e-9)

    def test_angular_wrap(self):
        t = truth_person(0, 3.0, 0.0, math.radians(359.0))
        truth = make_truth([t])
        res = result(0, [state(0, 3.0, 0.0, math.radians(1.0))])
        errors = scenario_errors([res], truth)
        assert errors.hfd_deg == pytest.approx(2.0, abs=1e-9)

    def test_group_mismatch_counts_failure(self):
        t0 = truth_person(0, 3.0, 0.5, 1.0)
        t1 = truth_person(1, 3.0, -0.5, 2.0)
        truth = make_truth([t0, t1], groups=[(0, 1)], interest_points=[(3.0, 0.0)], zone_areas=[0.0])
        res = result(0, [state(0, 3.0, 0.5, 1.0), state(1, 3.0, -0.5, 2.0)], groups=[])
        errors = scenario_errors([res], truth)
        assert errors.detection_failures == 1
        assert errors.iza == 0.0  # excluded, not counted

    def test_frame_order_invariance(self):
        rng = np.random.default_rng(2)
        t = truth_person(0, 3.0, 0.0, 1.0)
        truth = make_truth([t], frames=8)
        results = [
            result(i, [state(0, 3.0 + rng.normal(0, 0.05), rng.normal(0, 0.05), 1.0)])
            for i in range(8)
        ]
        a = scenario_errors(results, truth)
        b = scenario_errors(results[::-1], truth)
        assert a.hpx == pytest.approx(b.hpx, abs=1e-15)
        assert a.hpy == pytest.approx(b.hpy, abs=1e-15)

    def test_self_comparison_is_zero(self):
        # truth built from the pipeline's own output values
        s = state(0, 2.77, -0.41, 0.913)
        truth = make_truth([truth_person(0, 2.77, -0.41, 0.913)])
        errors = scenario_errors([result(0, [s])], truth)
        assert errors.hpx == 0.0 and errors.hpy == 0.0 and errors.hfd_deg == 0.0


class TestTimeStages:
    def res_with(self, loc, grp, cmap):
        return FrameResult(
            frame_id=0, timestamp=0.0, states=[], groups=[], rejected_groups=[],
            noise_ids=[], dropped=[], timings=StageTimings(loc, grp, cmap),
        )

    def test_empty(self):
        report = time_stages([], warmup=0)
        assert report.stages == []

    def test_warmup_excluded(self):
        results = [self.res_with(10.0, 1.0, 1.0)] * 3 + [self.res_with(1.0, 1.0, 1.0)] * 7
        report = time_stages(results, warmup=3)
        loc = next(s for s in report.stages if s.stage == "localization")
        assert loc.mean_ms == pytest.approx(1.0)
        assert loc.count == 7
        assert report.warmup_skipped == 3

    def test_stage_names_and_positive(self):
        report = time_stages([self.res_with(0.5, 0.1, 0.2)], warmup=0)
        assert [s.stage for s in report.stages] == ["localization", "grouping", "costmap"]
        for s in report.stages:
            assert s.mean_ms >= 0 and s.p95_ms >= s.mean_ms * 0.99
