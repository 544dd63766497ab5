# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
import csv
import math
import unittest

import numpy as np
import pytest

from votodometry.evaluation import (
    PER_FRAME_PAIR,
    PER_METER,
    MetricReport,
    Segment,
    are,
    ate,
    evaluate,
    rte_rre,
    segment_pairs,
    static_trajectory,
    umeyama_align,
    write_metrics_csv,
)
from votodometry.exceptions import (
    ConfigurationError,
    DegenerateAlignment,
    EmptySegmentError,
    LengthMismatch,
)
from votodometry.geometry import (
    Pose,
    Rotation,
    Trajectory,
    axis_angle_to_rot,
    random_rotation,
)


def random_trajectory(seed, length=20, step=0.2):
    rng = np.random.default_rng(seed)
    positions = np.cumsum(rng.normal(0.0, step, (length, 3)), axis=0)
    poses = [Pose(random_rotation(seed * 1000 + k), positions[k])
             for k in range(length)]
    return Trajectory(poses, np.arange(length) / 30.0)


def perturbed(trajectory, seed, noise=0.05):
    rng = np.random.default_rng(seed)
    poses = [Pose(random_rotation(seed * 1000 + k, 0.1).compose(
                  pose.rotation),
                  pose.translation + rng.normal(0.0, noise, 3))
             for k, pose in enumerate(trajectory)]
    return Trajectory(poses, trajectory.timestamps)


def shifted(trajectory, offset):
    return Trajectory([Pose(p.rotation, p.translation + offset)
                       for p in trajectory], trajectory.timestamps)


def straight_line(count, step, scale=1.0):
    poses = [Pose(Rotation.identity(), [0.0, 0.0, scale * step * k])
             for k in range(count)]
    return Trajectory(poses)


class AbsoluteErrorTestCase(unittest.TestCase):

    def test_identical(self):
        gt = random_trajectory(1)
        self.assertEqual(ate(gt, gt), 0.0)
        self.assertLess(are(gt, gt), 1e-9)

    def test_constant_shift(self):
        gt = random_trajectory(2)
        self.assertAlmostEqual(ate(gt, shifted(gt, [1.0, 0.0, 0.0])), 1.0,
                               places=12)

    def test_alternating_offsets(self):
        gt = random_trajectory(3, length=10)
        est = Trajectory(
            [Pose(p.rotation, p.translation + (k % 2 == 0) * np.array(
                [1.0, 0.0, 0.0])) for k, p in enumerate(gt)],
            gt.timestamps)
        self.assertAlmostEqual(ate(gt, est), math.sqrt(0.5), places=12)

    def test_constant_rotation(self):
        gt = random_trajectory(4)
        turn = axis_angle_to_rot([0, 0, 1], math.radians(10.0))
        est = Trajectory([Pose(p.rotation.compose(turn), p.translation)
                          for p in gt], gt.timestamps)
        self.assertAlmostEqual(are(gt, est), 10.0, places=6)

    def test_half_rotated(self):
        gt = random_trajectory(5, length=10)
        turn = axis_angle_to_rot([0, 0, 1], math.radians(10.0))
        est = Trajectory(
            [Pose(p.rotation.compose(turn) if k < 5 else p.rotation,
                  p.translation) for k, p in enumerate(gt)], gt.timestamps)
        self.assertAlmostEqual(are(gt, est), 10.0 / math.sqrt(2), places=6)

    def test_symmetric(self):
        gt, est = random_trajectory(6), random_trajectory(7)
        self.assertAlmostEqual(ate(gt, est), ate(est, gt), places=12)
        self.assertAlmostEqual(are(gt, est), are(est, gt), places=9)

    def test_length_mismatch(self):
        with self.assertRaises(LengthMismatch):
            ate(random_trajectory(8, 5), random_trajectory(8, 6))


class RelativeErrorTestCase(unittest.TestCase):

    def test_identical(self):
        gt = random_trajectory(9)
        rte, rre = rte_rre(gt, gt, PER_FRAME_PAIR)
        self.assertEqual(rte, 0.0)
        self.assertLess(rre, 1e-9)

    def test_global_offset_cancels(self):
        gt = random_trajectory(10)
        offset = Pose(random_rotation(11), [3.0, -1.0, 2.0])
        est = Trajectory([offset.compose(p) for p in gt], gt.timestamps)
        for segment in (PER_FRAME_PAIR, PER_METER):
            rte, rre = rte_rre(gt, est, segment)
            self.assertLess(rte, 1e-9)
            self.assertLess(rre, 1e-6)

    def test_scale_drift_per_meter(self):
        gt = straight_line(40, 0.1)
        est = straight_line(40, 0.1, scale=1.01)
        rte, rre = rte_rre(gt, est)
        self.assertAlmostEqual(rte, 0.01, delta=0.0011)
        self.assertEqual(rre, 0.0)

    def test_per_meter_pairs(self):
        pairs = segment_pairs(straight_line(6, 0.4), Segment('per_meter',
                                                             1.0))
        self.assertEqual(pairs, [(0, 3), (1, 4), (2, 5)])

    def test_too_short(self):
        with self.assertRaises(EmptySegmentError):
            rte_rre(straight_line(5, 0.1), straight_line(5, 0.1))

    def test_timestamps_do_not_matter(self):
        gt, est = random_trajectory(12), random_trajectory(13)
        slow = Trajectory(gt.poses, gt.timestamps * 7.0)
        slow_est = Trajectory(est.poses, est.timestamps * 7.0)
        self.assertEqual(evaluate(gt, est), evaluate(slow, slow_est))


class SegmentTestCase(unittest.TestCase):

    def test_parse(self):
        self.assertEqual(Segment.parse('per_frame_pair'), PER_FRAME_PAIR)
        self.assertEqual(Segment.parse('per_meter'), PER_METER)
        self.assertEqual(Segment.parse('per_meter:2.5').length, 2.5)

    def test_str(self):
        self.assertEqual(str(PER_METER), 'per_meter:1')
        self.assertEqual(str(Segment.parse('per_meter:0.5')), 'per_meter:0.5')

    def test_bad(self):
        for text in ('per_meter:-1', 'per_meter:x', 'per_second',
                     'per_frame_pair:2'):
            with self.assertRaises(ConfigurationError):
                Segment.parse(text)


class AlignmentTestCase(unittest.TestCase):

    def test_recovers_rigid_offset(self):
        gt = random_trajectory(14)
        offset = Pose(random_rotation(15), [1.0, 2.0, -3.0])
        est = Trajectory([offset.compose(p) for p in gt], gt.timestamps)
        aligned, alignment = umeyama_align(gt, est)
        np.testing.assert_allclose(alignment.pose.as_matrix(),
                                   offset.inverse().as_matrix(), atol=1e-9)
        self.assertEqual(alignment.scale, 1.0)
        self.assertLess(ate(gt, aligned), 1e-9)
        self.assertLess(are(gt, aligned), 1e-6)

    def test_recovers_scale(self):
        gt = random_trajectory(16)
        est = Trajectory([Pose(p.rotation, 2.0 * p.translation) for p in gt],
                         gt.timestamps)
        aligned, alignment = umeyama_align(gt, est, 'sim3')
        # the alignment maps the estimate onto ground truth
        self.assertAlmostEqual(1.0 / alignment.scale, 2.0, places=9)
        self.assertLess(ate(gt, aligned), 1e-9)

    def test_never_worse(self):
        for seed in range(17, 27):
            gt = random_trajectory(seed)
            est = perturbed(shifted(gt, [0.3, 0.0, -0.2]), seed)
            for mode in ('se3', 'sim3'):
                aligned, _ = umeyama_align(gt, est, mode)
                self.assertLessEqual(ate(gt, aligned), ate(gt, est) + 1e-12)

    def test_rigid_keeps_distances(self):
        gt = random_trajectory(27)
        est = perturbed(gt, 28, noise=0.2)
        aligned, _ = umeyama_align(gt, est, 'se3')
        before = np.linalg.norm(np.diff(est.positions, axis=0), axis=1)
        after = np.linalg.norm(np.diff(aligned.positions, axis=0), axis=1)
        np.testing.assert_allclose(after, before, atol=1e-12)

    def test_collinear(self):
        gt = random_trajectory(29, length=5)
        with self.assertRaises(DegenerateAlignment):
            umeyama_align(gt, straight_line(5, 0.1), 'sim3')
        with self.assertRaises(DegenerateAlignment):
            umeyama_align(gt, straight_line(5, 0.1), 'se3')

    def test_coincident(self):
        gt = random_trajectory(30, length=5)
        with self.assertRaises(DegenerateAlignment):
            umeyama_align(gt, static_trajectory(gt))

    def test_too_few_poses(self):
        gt = random_trajectory(31, length=2)
        with self.assertRaises(DegenerateAlignment):
            umeyama_align(gt, gt)

    def test_unknown_mode(self):
        gt = random_trajectory(32)
        with self.assertRaises(ConfigurationError):
            umeyama_align(gt, gt, 'affine')


# ########## #
#   Oracle   #
# ########## #

def _matrices(trajectory):
    out = []
    for pose in trajectory:
        m = np.eye(4)
        m[:3, :3] = pose.rotation.m
        m[:3, 3] = pose.translation
        out.append(m)
    return out


def _angle(r):
    return math.acos(max(-1.0, min(1.0, (np.trace(r) - 1.0) / 2.0)))


def naive_metrics(gt, est, length=1.0):
    a, b = _matrices(gt), _matrices(est)
    n = len(a)
    ate_sq = sum(np.sum((a[k][:3, 3] - b[k][:3, 3]) ** 2) for k in range(n))
    are_sq = sum(_angle(a[k][:3, :3].T @ b[k][:3, :3]) ** 2
                 for k in range(n))
    rte_sq, rre_sq, count = 0.0, 0.0, 0
    for i in range(n):
        travelled = 0.0
        for j in range(i + 1, n):
            travelled += np.linalg.norm(a[j][:3, 3] - a[j - 1][:3, 3])
            if travelled > length:
                gt_rel = np.linalg.inv(a[i]) @ a[j]
                est_rel = np.linalg.inv(b[i]) @ b[j]
                error = np.linalg.inv(gt_rel) @ est_rel
                rte_sq += np.sum(error[:3, 3] ** 2)
                rre_sq += _angle(error[:3, :3]) ** 2
                count += 1
                break
    return (math.sqrt(ate_sq / n), math.degrees(math.sqrt(are_sq / n)),
            math.sqrt(rte_sq / count), math.degrees(math.sqrt(rre_sq / count)))


def test_matches_naive_metrics():
    for seed in range(50):
        gt = random_trajectory(100 + seed, length=15, step=0.3)
        est = perturbed(gt, 200 + seed, noise=0.1)
        report = evaluate(gt, est)
        expected = naive_metrics(gt, est)
        actual = (report.ate_m, report.are_deg, report.rte_m,
                  report.rre_deg)
        np.testing.assert_allclose(actual, expected, rtol=1e-9, atol=1e-9)


# ########### #
#   Reports   #
# ########### #

def test_identical_report_is_zero():
    gt = random_trajectory(33)
    report = evaluate(gt, gt)
    assert (report.ate_m, report.are_deg, report.rte_m, report.rre_deg) == \
        (0.0, 0.0, 0.0, 0.0)
    assert report.aligned is False
    assert report.segment_definition == 'per_meter:1'


def test_report_records_options():
    gt = random_trajectory(34)
    report = evaluate(gt, perturbed(gt, 35), align='sim3',
                      segment='per_frame_pair')
    assert report.aligned is True
    assert report.alignment == 'sim3'
    assert report.segment_definition == 'per_frame_pair'


def test_report_json_round_trip():
    gt = random_trajectory(36)
    report = evaluate(gt, perturbed(gt, 37), align='se3')
    assert MetricReport.from_json(report.to_json()) == report


def test_reanchor():
    gt = random_trajectory(38)
    offset = Pose(random_rotation(39), [5.0, 0.0, 0.0])
    est = Trajectory([offset.compose(p) for p in gt], gt.timestamps)
    assert evaluate(gt, est).ate_m > 1.0
    assert evaluate(gt, est, reanchor=True).ate_m < 1e-9


def test_static_baseline():
    gt = random_trajectory(40)
    static = static_trajectory(gt)
    assert len(static) == len(gt)
    assert evaluate(gt, static).ate_m > 0


def test_metrics_csv(tmp_path):
    gt = random_trajectory(41)
    report = evaluate(gt, perturbed(gt, 42))
    path = str(tmp_path / 'metrics.csv')
    write_metrics_csv([('seq-000', report), ('seq-001', report)], path)
    with open(path) as fb:
        rows = list(csv.reader(fb))
    assert rows[0] == ['sequence', 'ATE', 'ARE', 'RTE', 'RRE']
    assert rows[1][0] == 'seq-000'
    assert float(rows[2][1]) == report.ate_m
    assert float(rows[2][4]) == pytest.approx(report.rre_deg)
