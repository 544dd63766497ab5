# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
Rotations, rigid poses and trajectories.

Poses are world-from-camera. A relative pose ``rel_k`` takes frame ``k``
to frame ``k + 1`` by right-composition::

    poses[k + 1] = poses[k].compose(rel_k)

so ``rel_k = poses[k].inverse().compose(poses[k + 1])``.

Quaternions are ``(w, x, y, z)`` with ``w >= 0``. Euler angles are
intrinsic ZYX, i.e. ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.

"""
import collections
import logging
import math

import numpy as np

from .exceptions import (
    DegenerateInputError,
    LengthMismatch,
    NonMonotonicTimestamps,
    ShapeError,
)
from .numerics import svd3


ORTHONORMAL_TOLERANCE = 1e-9
PROCRUSTES_RANK_TOLERANCE = 1e-12
GIMBAL_LOCK_TOLERANCE = 1e-7
QUATERNION_WARN_CORRECTION = 1e-6

logger = logging.getLogger('votodometry')


def _as_matrix(m, operation):
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ShapeError(operation, m.shape, (3, 3))
    return m


def _frozen(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


class Rotation(object):
    """An element of SO(3), held as an immutable 3x3 matrix."""

    __slots__ = ('_m',)

    def __init__(self, m, validate=True):
        m = _as_matrix(m, 'Rotation')
        if validate:
            if not np.all(np.isfinite(m)):
                raise ValueError("rotation matrix has non-finite entries")
            error = np.abs(m.T @ m - np.eye(3)).max()
            if error > ORTHONORMAL_TOLERANCE:
                raise ValueError("matrix is not orthonormal "
                                 "(max |RᵀR - I| = {:.3g})".format(error))
            det = np.linalg.det(m)
            if abs(det - 1.0) > ORTHONORMAL_TOLERANCE:
                raise ValueError("rotation determinant is {!r}, "
                                 "expected +1".format(det))
        self._m = _frozen(m)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), validate=False)

    @property
    def m(self):
        return self._m

    def compose(self, other):
        return Rotation(self._m @ other.m, validate=False)

    def inverse(self):
        return Rotation(self._m.T, validate=False)

    def apply(self, points):
        """Rotate an ``(..., 3)`` array of points."""
        return np.asarray(points, dtype=np.float64) @ self._m.T

    def angle(self):
        """Rotation angle in radians, in ``[0, π]``."""
        return geodesic_angle(Rotation.identity(), self)

    def __matmul__(self, other):
        return self.compose(other)

    def __repr__(self):
        return "Rotation({!r})".format(self._m.tolist())


class Pose(object):
    """A rigid transform ``x -> R x + t`` (world-from-camera)."""

    __slots__ = ('_rotation', '_translation')

    def __init__(self, rotation, translation):
        if not isinstance(rotation, Rotation):
            rotation = Rotation(rotation)
        translation = np.asarray(translation, dtype=np.float64)
        if translation.shape != (3,):
            raise ShapeError('Pose', translation.shape, (3,))
        self._rotation = rotation
        self._translation = _frozen(translation)

    @classmethod
    def identity(cls):
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise ShapeError('Pose.from_matrix', matrix.shape, (4, 4))
        return cls(Rotation(matrix[:3, :3]), matrix[:3, 3])

    @property
    def rotation(self):
        return self._rotation

    @property
    def translation(self):
        return self._translation

    def as_matrix(self):
        matrix = np.eye(4)
        matrix[:3, :3] = self._rotation.m
        matrix[:3, 3] = self._translation
        return matrix

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(self._rotation.compose(other.rotation),
                    self._rotation.m @ other.translation + self._translation)

    def inverse(self):
        inverse = self._rotation.inverse()
        return Pose(inverse, -(inverse.m @ self._translation))

    def transform_points(self, points):
        """Map an ``(..., 3)`` array of points through this pose."""
        return self._rotation.apply(points) + self._translation

    def __matmul__(self, other):
        return self.compose(other)

    def __repr__(self):
        return "Pose(rotation={!r}, translation={!r})".format(
            self._rotation.m.tolist(), self._translation.tolist())


class Trajectory(object):
    """Absolute poses with strictly increasing timestamps (seconds)."""

    def __init__(self, poses, timestamps=None, source='trajectory'):
        poses = tuple(poses)
        if timestamps is None:
            timestamps = np.arange(len(poses), dtype=np.float64)
        timestamps = np.asarray(timestamps, dtype=np.float64).reshape(-1)
        if len(poses) != len(timestamps):
            raise LengthMismatch(len(poses), len(timestamps))
        if not poses:
            raise ValueError("a trajectory holds at least one pose")
        steps = np.diff(timestamps)
        if np.any(~(steps > 0)):
            raise NonMonotonicTimestamps(
                source, int(np.argmin(steps > 0)) + 1)
        self.poses = poses
        self.timestamps = _frozen(timestamps)

    def __len__(self):
        return len(self.poses)

    def __iter__(self):
        return iter(self.poses)

    def __getitem__(self, index):
        return self.poses[index]

    @property
    def positions(self):
        return np.array([pose.translation for pose in self.poses])

    @property
    def rotations(self):
        return np.array([pose.rotation.m for pose in self.poses])

    def reanchored(self):
        """Express every pose relative to the first one."""
        anchor = self.poses[0].inverse()
        return Trajectory([anchor.compose(pose) for pose in self.poses],
                          self.timestamps)

    def path_lengths(self):
        """Cumulative distance travelled, starting at 0."""
        steps = np.linalg.norm(np.diff(self.positions, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def __repr__(self):
        return "<Trajectory frames={} span={:.3f}s>".format(
            len(self), self.timestamps[-1] - self.timestamps[0])


# ##################### #
#   Rotation algebra    #
# ##################### #

def procrustes_project(m_raw):
    """The rotation nearest to ``m_raw`` in Frobenius norm.

    Solves the special orthogonal Procrustes problem through
    ``m_raw = U Σ Vᵀ``, returning ``U diag(1, 1, det(U Vᵀ)) Vᵀ``.
    Raises :class:`DegenerateInputError` when the second singular value
    is at most 1e-12 of the first (rank below 2), where the answer is
    not unique.
    """
    m_raw = _as_matrix(m_raw, 'procrustes_project')
    if not np.all(np.isfinite(m_raw)):
        raise DegenerateInputError('procrustes_project', [np.nan] * 3)
    u, sigma, v = svd3(m_raw)
    if sigma[1] <= PROCRUSTES_RANK_TOLERANCE * sigma[0]:
        raise DegenerateInputError('procrustes_project', sigma)
    correction = np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ v.T)) or 1.0])
    return Rotation(u @ correction @ v.T)


def geodesic_angle(a, b):
    """Angle in radians of the rotation taking ``a`` to ``b``."""
    a = a.m if isinstance(a, Rotation) else _as_matrix(a, 'geodesic_angle')
    b = b.m if isinstance(b, Rotation) else _as_matrix(b, 'geodesic_angle')
    relative = a.T @ b
    # atan2 form, accurate near zero
    skew = relative - relative.T
    sine = np.linalg.norm([skew[2, 1], skew[0, 2], skew[1, 0]]) / 2.0
    cosine = (np.trace(relative) - 1.0) / 2.0
    return float(math.atan2(sine, cosine))


def axis_angle_to_rot(axis, angle):
    """Rodrigues' formula. ``axis`` need not be normalized."""
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ValueError("rotation axis must be non-zero")
    x, y, z = axis / norm
    skew = np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])
    m = (np.eye(3) + math.sin(angle) * skew +
         (1.0 - math.cos(angle)) * (skew @ skew))
    return Rotation(m)


def random_rotation(rng_seed, max_angle=math.pi):
    """Rotation about a uniformly random axis by an angle drawn
    uniformly from ``(0, max_angle]``. Deterministic per seed.
    """
    if not 0.0 < max_angle <= math.pi:
        raise ValueError("max_angle must lie in (0, π], "
                         "got {!r}".format(max_angle))
    rng = np.random.default_rng(rng_seed)
    axis = rng.normal(size=3)
    while np.linalg.norm(axis) < 1e-12:
        axis = rng.normal(size=3)
    angle = max_angle * (1.0 - rng.random())
    return axis_angle_to_rot(axis, angle)


# ######################## #
#   Pose & trajectory ops  #
# ######################## #

def pose_inverse(pose):
    return pose.inverse()


def compose_relative(start, rel_poses, timestamps=None):
    """Chain consecutive relative poses onto ``start``.

    Returns a :class:`Trajectory` with ``len(rel_poses) + 1`` poses.
    Timestamps default to the frame indices.
    """
    poses = [start]
    for rel in rel_poses:
        poses.append(poses[-1].compose(rel))
    return Trajectory(poses, timestamps)


def relative_poses(trajectory):
    """Consecutive relatives, the inverse of :func:`compose_relative`."""
    poses = list(trajectory)
    return [prev.inverse().compose(curr)
            for prev, curr in zip(poses[:-1], poses[1:])]


# ######################## #
#   Representation changes #
# ######################## #

EulerAngles = collections.namedtuple(
    'EulerAngles', ('yaw', 'pitch', 'roll', 'gimbal_lock'))


def rot_to_quat(rotation):
    """Unit quaternion ``(w, x, y, z)``, ``w >= 0`` (Shepperd's method)."""
    m = rotation.m if isinstance(rotation, Rotation) else \
        _as_matrix(rotation, 'rot_to_quat')
    trace = np.trace(m)
    pivot = int(np.argmax([trace, m[0, 0], m[1, 1], m[2, 2]]))
    if pivot == 0:
        w = 0.5 * math.sqrt(max(1.0 + trace, 0.0))
        f = 0.25 / w
        q = (w, (m[2, 1] - m[1, 2]) * f, (m[0, 2] - m[2, 0]) * f,
             (m[1, 0] - m[0, 1]) * f)
    elif pivot == 1:
        x = 0.5 * math.sqrt(max(1.0 + m[0, 0] - m[1, 1] - m[2, 2], 0.0))
        f = 0.25 / x
        q = ((m[2, 1] - m[1, 2]) * f, x, (m[0, 1] + m[1, 0]) * f,
             (m[0, 2] + m[2, 0]) * f)
    elif pivot == 2:
        y = 0.5 * math.sqrt(max(1.0 - m[0, 0] + m[1, 1] - m[2, 2], 0.0))
        f = 0.25 / y
        q = ((m[0, 2] - m[2, 0]) * f, (m[0, 1] + m[1, 0]) * f, y,
             (m[1, 2] + m[2, 1]) * f)
    else:
        z = 0.5 * math.sqrt(max(1.0 - m[0, 0] - m[1, 1] + m[2, 2], 0.0))
        f = 0.25 / z
        q = ((m[1, 0] - m[0, 1]) * f, (m[0, 2] + m[2, 0]) * f,
             (m[1, 2] + m[2, 1]) * f, z)
    q = np.array(q)
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def normalize_quaternion(quaternion):
    """Returns ``(unit quaternion, correction)`` where ``correction`` is
    how far the input norm was from 1.
    """
    q = np.asarray(quaternion, dtype=np.float64)
    if q.shape != (4,):
        raise ShapeError('normalize_quaternion', q.shape, (4,))
    norm = np.linalg.norm(q)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("cannot normalize quaternion {!r}".format(q.tolist()))
    return q / norm, abs(norm - 1.0)


def quat_matrix(q):
    """The 3x3 matrix of a unit quaternion ``(w, x, y, z)``, unchecked."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_to_rot(quaternion):
    q, correction = normalize_quaternion(quaternion)
    if correction > QUATERNION_WARN_CORRECTION:
        logger.warning("Normalized quaternion {} (norm off by {:.3g})"
                       .format(np.round(quaternion, 6).tolist(), correction))
    return Rotation(quat_matrix(q))


def euler_matrix(yaw, pitch, roll):
    """``Rz(yaw) @ Ry(pitch) @ Rx(roll)``, unchecked."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def euler_to_rot(yaw, pitch, roll):
    return Rotation(euler_matrix(yaw, pitch, roll))


def rot_to_euler(rotation):
    """Intrinsic ZYX angles of ``rotation``.

    Near gimbal lock (``cos(pitch) < 1e-7``) roll is fixed to 0 and
    folded into yaw; the returned ``gimbal_lock`` flag is then set.
    """
    m = rotation.m if isinstance(rotation, Rotation) else \
        _as_matrix(rotation, 'rot_to_euler')
    cos_pitch = math.hypot(m[0, 0], m[1, 0])
    pitch = math.atan2(-m[2, 0], cos_pitch)
    if cos_pitch < GIMBAL_LOCK_TOLERANCE:
        yaw = math.atan2(-m[0, 1], m[1, 1])
        logger.warning("Gimbal lock in Euler decomposition "
                       "(pitch={:.9f})".format(pitch))
        return EulerAngles(yaw, pitch, 0.0, True)
    yaw = math.atan2(m[1, 0], m[0, 0])
    roll = math.atan2(m[2, 1], m[2, 2])
    return EulerAngles(yaw, pitch, roll, False)


__all__ = (
    'EulerAngles',
    'Pose',
    'Rotation',
    'Trajectory',
    'axis_angle_to_rot',
    'compose_relative',
    'euler_matrix',
    'euler_to_rot',
    'geodesic_angle',
    'normalize_quaternion',
    'pose_inverse',
    'procrustes_project',
    'quat_matrix',
    'quat_to_rot',
    'random_rotation',
    'relative_poses',
    'rot_to_euler',
    'rot_to_quat',
)
