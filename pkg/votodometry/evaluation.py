# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
Trajectory error metrics.

Estimates are compared frame by frame with the ground truth. No
alignment is applied unless asked for, so the numbers reflect what a
deployed odometry system would report.

"""
import collections
import csv
import json
import math

import numpy as np

from .exceptions import (
    ConfigurationError,
    DegenerateAlignment,
    EmptySegmentError,
    LengthMismatch,
)
from .geometry import Pose, Rotation, Trajectory, geodesic_angle


ALIGN_MODES = ('se3', 'sim3')
COLLINEAR_TOLERANCE = 1e-9
CSV_COLUMNS = ('sequence', 'ATE', 'ARE', 'RTE', 'RRE')


class Segment(collections.namedtuple('Segment', ('kind', 'length'))):
    """How relative errors pair frames.

    ``per_frame_pair`` compares consecutive frames. ``per_meter`` pairs
    each frame with the first later one whose ground-truth path length
    from it exceeds ``length`` meters.
    """
    __slots__ = ()

    @classmethod
    def parse(cls, text):
        """``per_frame_pair``, ``per_meter`` or ``per_meter:<L>``."""
        kind, _, length = str(text).partition(':')
        if kind == 'per_frame_pair' and not length:
            return cls('per_frame_pair', None)
        if kind == 'per_meter':
            try:
                value = float(length) if length else 1.0
            except ValueError:
                value = -1.0
            if value > 0 and math.isfinite(value):
                return cls('per_meter', value)
        raise ConfigurationError('segment', 'cannot parse {!r}'.format(text))

    def __str__(self):
        if self.kind == 'per_frame_pair':
            return self.kind
        return '{}:{:g}'.format(self.kind, self.length)


PER_FRAME_PAIR = Segment('per_frame_pair', None)
PER_METER = Segment('per_meter', 1.0)


def _check_lengths(gt, est):
    if len(gt) != len(est):
        raise LengthMismatch(len(gt), len(est))


def _rmse(values):
    values = np.asarray(values, dtype=np.float64)
    return float(np.sqrt(np.mean(values * values)))


def ate(gt, est):
    """RMSE in meters of the position differences."""
    _check_lengths(gt, est)
    return _rmse(np.linalg.norm(gt.positions - est.positions, axis=1))


def are(gt, est):
    """RMSE in degrees of the orientation differences."""
    _check_lengths(gt, est)
    return math.degrees(_rmse([geodesic_angle(a.rotation, b.rotation)
                               for a, b in zip(gt, est)]))


def segment_pairs(gt, segment=PER_METER):
    """Frame index pairs ``(i, j)`` the relative errors compare."""
    if segment.kind == 'per_frame_pair':
        return [(i, i + 1) for i in range(len(gt) - 1)]
    lengths = gt.path_lengths()
    pairs = []
    for i in range(len(gt)):
        later = np.flatnonzero(lengths[i + 1:] - lengths[i] > segment.length)
        if len(later):
            pairs.append((i, i + 1 + int(later[0])))
    return pairs


def rte_rre(gt, est, segment=PER_METER):
    """RMSE of the relative translation error (meters) and relative
    rotation error (degrees) over every segment.
    """
    _check_lengths(gt, est)
    pairs = segment_pairs(gt, segment)
    if not pairs:
        raise EmptySegmentError(str(segment), len(gt))
    translations, angles = [], []
    for i, j in pairs:
        gt_rel = gt[i].inverse().compose(gt[j])
        est_rel = est[i].inverse().compose(est[j])
        error = gt_rel.inverse().compose(est_rel)
        translations.append(np.linalg.norm(error.translation))
        angles.append(error.rotation.angle())
    return _rmse(translations), math.degrees(_rmse(angles))


# ############# #
#   Alignment   #
# ############# #

Alignment = collections.namedtuple('Alignment', ('scale', 'pose'))


def umeyama_align(gt, est, mode='se3'):
    """Least-squares transform taking ``est`` positions onto ``gt``.

    Returns the aligned estimate and an :class:`Alignment` with
    ``gt ≈ scale · R · est + t``. ``se3`` fixes the scale at 1.
    """
    if mode not in ALIGN_MODES:
        raise ConfigurationError('align', 'unknown mode {!r}'.format(mode))
    _check_lengths(gt, est)
    if len(gt) < 3:
        raise DegenerateAlignment(mode, 'needs at least 3 poses')
    model, data = gt.positions, est.positions
    mu_model, mu_data = model.mean(axis=0), data.mean(axis=0)
    model_centered = model - mu_model
    data_centered = data - mu_data
    spread = np.linalg.svd(data_centered, compute_uv=False)
    if spread[0] < COLLINEAR_TOLERANCE:
        raise DegenerateAlignment(mode, 'estimated positions coincide')
    if spread[1] < COLLINEAR_TOLERANCE * max(1.0, spread[0]):
        raise DegenerateAlignment(mode, 'estimated positions are collinear')

    count = float(len(model))
    correlation = model_centered.T @ data_centered / count
    sigma2 = (data_centered ** 2).sum() / count
    u, d, vt = np.linalg.svd(correlation)
    s = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2, 2] = -1.0
    rotation = u @ s @ vt
    scale = float(np.trace(np.diag(d) @ s) / sigma2) if mode == 'sim3' \
        else 1.0
    translation = mu_model - scale * rotation @ mu_data

    rot = Rotation(rotation)
    aligned = [Pose(rot.compose(pose.rotation),
                    scale * rotation @ pose.translation + translation)
               for pose in est]
    return (Trajectory(aligned, est.timestamps),
            Alignment(scale, Pose(rot, translation)))


# ########### #
#   Reports   #
# ########### #

_MetricReport = collections.namedtuple(
    'MetricReport',
    ('ate_m', 'are_deg', 'rte_m', 'rre_deg', 'aligned', 'alignment',
     'segment_definition'),
    defaults=(False, None, str(PER_METER)),
)


class MetricReport(_MetricReport):
    __slots__ = ()

    def as_dict(self):
        return dict(self._asdict())

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def evaluate(gt, est, align=None, segment=PER_METER, reanchor=False):
    """All four metrics of ``est`` against ``gt``.

    ``align`` is ``None`` (default), ``'se3'`` or ``'sim3'``. With
    ``reanchor`` both trajectories are first expressed relative to their
    first pose.
    """
    if isinstance(segment, str):
        segment = Segment.parse(segment)
    _check_lengths(gt, est)
    if reanchor:
        gt, est = gt.reanchored(), est.reanchored()
    if align is not None:
        est, _ = umeyama_align(gt, est, align)
    rte, rre = rte_rre(gt, est, segment)
    return MetricReport(ate(gt, est), are(gt, est), rte, rre,
                        align is not None, align, str(segment))


def static_trajectory(gt):
    """The zero-motion baseline: every pose stays at the first one."""
    return Trajectory([gt[0]] * len(gt), gt.timestamps)


def write_metrics_csv(rows, path):
    """Write ``(sequence, MetricReport)`` rows as a CSV table."""
    with open(path, 'w', newline='') as fb:
        writer = csv.writer(fb)
        writer.writerow(CSV_COLUMNS)
        for sequence, report in rows:
            writer.writerow([sequence, repr(report.ate_m),
                             repr(report.are_deg), repr(report.rte_m),
                             repr(report.rre_deg)])


__all__ = (
    'ALIGN_MODES',
    'Alignment',
    'MetricReport',
    'PER_FRAME_PAIR',
    'PER_METER',
    'Segment',
    'are',
    'ate',
    'evaluate',
    'rte_rre',
    'segment_pairs',
    'static_trajectory',
    'umeyama_align',
    'write_metrics_csv',
)
