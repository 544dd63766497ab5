# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
Pose head and training losses.

A single linear layer maps the camera states of frames ``2..T`` to one
raw pose vector each: a rotation block (9, 4 or 3 values depending on the
representation) followed by 3 translation values. The state of frame
``k`` predicts the relative pose from frame ``k - 1`` to frame ``k``.

Rotation gradients
------------------

For the ``rotation_matrix`` representation the loss is measured on the
Procrustes-projected matrix and the backward pass follows the
projection, using the derivative of the polar factor taken from the
forward SVD, so the gradient stays bounded near the target.
Quaternion and Euler blocks are already rotations; their angle goes
through ``arccos``, whose derivative is clipped where
``|cos| > 1 - 1e-7`` and zero where the cosine is clamped.

"""
import collections
import logging
import math

import numpy as np

from . import numerics as nx
from .exceptions import (
    ConfigurationError,
    DegenerateInputError,
    PredictionError,
    ShapeError,
)
from .geometry import (
    PROCRUSTES_RANK_TOLERANCE,
    Pose,
    euler_to_rot,
    procrustes_project,
    quat_to_rot,
)


ROTATION_WIDTHS = collections.OrderedDict((
    ('rotation_matrix', 9),
    ('quaternion', 4),
    ('euler', 3),
))
ARCCOS_CLIP = 1.0 - 1e-7
SINE_FLOOR = 1e-12
HEAD_INIT_STD = 1e-3

logger = logging.getLogger('votodometry')


_HeadConfig = collections.namedtuple(
    'HeadConfig', ('representation',), defaults=('rotation_matrix',))


class HeadConfig(_HeadConfig):
    __slots__ = ()

    @property
    def rotation_width(self):
        return ROTATION_WIDTHS[self.representation]

    @property
    def width(self):
        return self.rotation_width + 3

    def validate(self):
        if self.representation not in ROTATION_WIDTHS:
            raise ConfigurationError(
                'head.representation', 'expected one of {}, got {!r}'.format(
                    ', '.join(ROTATION_WIDTHS), self.representation))
        return self


_LossConfig = collections.namedtuple(
    'LossConfig', ('rotation_weight', 'translation_weight'),
    defaults=(10.0, 1.0))


class LossConfig(_LossConfig):
    """``λ`` (``rotation_weight``) and ``γ`` (``translation_weight``)."""
    __slots__ = ()

    def validate(self):
        for key in self._fields:
            if not getattr(self, key) > 0:
                raise ConfigurationError('loss.' + key, 'must be positive')
        return self


def identity_bias(representation):
    """Raw rotation values that decode to the identity rotation."""
    if representation == 'rotation_matrix':
        return np.eye(3).reshape(-1)
    if representation == 'quaternion':
        return np.array([1.0, 0.0, 0.0, 0.0])
    return np.zeros(3)


def init_head(config, hidden_dim, rng):
    """``(weight, bias)`` parameters of the single linear head."""
    weight = nx.parameter(
        rng.normal(0.0, HEAD_INIT_STD, (hidden_dim, config.width)),
        name='head.weight')
    bias = np.concatenate([identity_bias(config.representation),
                           rng.normal(0.0, HEAD_INIT_STD, 3)])
    return weight, nx.parameter(bias, name='head.bias')


def head_outputs(camera_states, weight, bias):
    """Apply the head to the states of frames ``2..T``.

    ``camera_states`` is ``(..., T, d)``; returns ``(..., T-1, width)``.
    """
    if camera_states.ndim < 2 or camera_states.shape[-2] < 2:
        raise ShapeError('head_outputs', camera_states.shape, ('T>=2', 'd'))
    return nx.linear(camera_states[..., 1:, :], weight, bias)


# ######################## #
#   Raw output to poses    #
# ######################## #

def _raw_to_pose(raw, representation):
    rotation_width = ROTATION_WIDTHS[representation]
    values = raw[:rotation_width]
    if representation == 'rotation_matrix':
        rotation = procrustes_project(values.reshape(3, 3))
    elif representation == 'quaternion':
        rotation = quat_to_rot(values)
    else:
        rotation = euler_to_rot(*values)
    return Pose(rotation, raw[rotation_width:])


def decode_poses(raw, representation):
    """Turn raw head rows ``(T-1, width)`` into ``T-1`` poses.

    Leading batch axes give nested lists.
    """
    raw = np.asarray(raw.data if isinstance(raw, nx.Tensor) else raw)
    if raw.ndim > 2:
        return [decode_poses(item, representation) for item in raw]
    poses = []
    for k, row in enumerate(raw):
        try:
            poses.append(_raw_to_pose(row, representation))
        except (DegenerateInputError, ValueError) as exc:
            raise PredictionError(k + 1, str(exc))
    return poses


def predict_poses(camera_states, weight, bias, config):
    """``T-1`` relative poses from ``(T, d)`` camera states."""
    with nx.no_tape():
        raw = head_outputs(nx.constant(camera_states), weight, bias)
    return decode_poses(raw, config.representation)


# ################################## #
#   Differentiable rotation blocks   #
# ################################## #

_QUAT_TERMS = {
    (0, 0): ((2, 2, -4), (3, 3, -4)),
    (0, 1): ((0, 3, -2), (1, 2, 2), (2, 1, 2), (3, 0, -2)),
    (0, 2): ((0, 2, 2), (1, 3, 2), (2, 0, 2), (3, 1, 2)),
    (1, 0): ((0, 3, 2), (1, 2, 2), (2, 1, 2), (3, 0, 2)),
    (1, 1): ((1, 1, -4), (3, 3, -4)),
    (1, 2): ((0, 1, -2), (1, 0, -2), (2, 3, 2), (3, 2, 2)),
    (2, 0): ((0, 2, -2), (1, 3, 2), (2, 0, -2), (3, 1, 2)),
    (2, 1): ((0, 1, 2), (1, 0, 2), (2, 3, 2), (3, 2, 2)),
    (2, 2): ((1, 1, -4), (2, 2, -4)),
}


def _quat_jacobian():
    """``J`` with ``dM[i, j] / dq[k] = sum_l J[i, j, k, l] * q[l]``."""
    jacobian = np.zeros((3, 3, 4, 4))
    for (i, j), terms in _QUAT_TERMS.items():
        for k, l, value in terms:
            jacobian[i, j, k, l] = value
    return jacobian


_QUAT_JACOBIAN = _quat_jacobian()


def _quat_matrices(q):
    w, x, y, z = np.moveaxis(q, -1, 0)
    rows = [
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def quaternion_matrices(raw):
    """Normalize ``(..., 4)`` quaternions and build ``(..., 3, 3)``
    rotation matrices, differentiably.
    """
    norm = np.linalg.norm(raw.data, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise PredictionError(-1, 'zero quaternion')
    unit = raw.data / norm

    def grad_fn(g):
        jacobian = np.einsum('ijkl,...l->...ijk', _QUAT_JACOBIAN, unit)
        g_unit = np.einsum('...ij,...ijk->...k', g, jacobian)
        radial = (g_unit * unit).sum(axis=-1, keepdims=True)
        return ((g_unit - unit * radial) / norm,)

    return nx.record(_quat_matrices(unit), (raw,), grad_fn, 'quat_matrix')


def _axis_rotations(angles):
    """``Rz(yaw)``, ``Ry(pitch)``, ``Rx(roll)`` and their derivatives."""
    yaw, pitch, roll = np.moveaxis(angles, -1, 0)
    zero, one = np.zeros_like(yaw), np.ones_like(yaw)

    def build(rows):
        return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)

    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    rz = build([[cy, -sy, zero], [sy, cy, zero], [zero, zero, one]])
    ry = build([[cp, zero, sp], [zero, one, zero], [-sp, zero, cp]])
    rx = build([[one, zero, zero], [zero, cr, -sr], [zero, sr, cr]])
    drz = build([[-sy, -cy, zero], [cy, -sy, zero], [zero, zero, zero]])
    dry = build([[-sp, zero, cp], [zero, zero, zero], [-cp, zero, -sp]])
    drx = build([[zero, zero, zero], [zero, -sr, -cr], [zero, cr, -sr]])
    return (rz, ry, rx), (drz, dry, drx)


def euler_matrices(raw):
    """``(..., 3)`` ZYX angles (yaw, pitch, roll) to ``(..., 3, 3)``
    matrices, differentiably.
    """
    (rz, ry, rx), (drz, dry, drx) = _axis_rotations(raw.data)

    def grad_fn(g):
        partials = (drz @ ry @ rx, rz @ dry @ rx, rz @ ry @ drx)
        return (np.stack([(g * p).sum(axis=(-2, -1)) for p in partials],
                         axis=-1),)

    return nx.record(rz @ ry @ rx, (raw,), grad_fn, 'euler_matrix')


def rotation_matrices(raw, representation):
    """The differentiable ``(..., 3, 3)`` rotation block of raw head rows."""
    width = ROTATION_WIDTHS[representation]
    block = raw[..., :width]
    if representation == 'rotation_matrix':
        return nx.reshape(block, block.shape[:-1] + (3, 3))
    if representation == 'quaternion':
        return quaternion_matrices(block)
    return euler_matrices(block)


def translations(raw):
    return raw[..., -3:]


# ########## #
#   Losses   #
# ########## #

def _projected_angle(m, target):
    """Geodesic angle from ``target`` to the rotation nearest ``m``, with
    its derivative with respect to ``m``. ``None`` when ``m`` has rank
    below 2.

    With ``m = U S Vᵀ`` (sign-corrected so ``R = U Vᵀ`` is proper), a
    change ``dm`` turns ``R`` by ``V Ω Vᵀ`` where
    ``Ω_ij = (Y_ij - Y_ji) / (s_i + s_j)`` and ``Y = Uᵀ dm V``. The angle
    grows along the unit axis of ``targetᵀ R``.
    """
    u, sigma, v = nx.svd3(m)
    if sigma[1] <= PROCRUSTES_RANK_TOLERANCE * sigma[0]:
        return None
    sign = np.sign(np.linalg.det(u @ v.T)) or 1.0
    u = u * [1.0, 1.0, sign]
    sigma = sigma * [1.0, 1.0, sign]
    relative = target.T @ u @ v.T
    axis = np.array([relative[2, 1] - relative[1, 2],
                     relative[0, 2] - relative[2, 0],
                     relative[1, 0] - relative[0, 1]])
    sine = np.linalg.norm(axis) / 2.0
    angle = math.atan2(sine, (np.trace(relative) - 1.0) / 2.0)
    if sine <= SINE_FLOOR:
        return angle, np.zeros((3, 3))
    x, y, z = axis / (2.0 * sine)
    skew = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    sums = sigma[:, None] + sigma[None, :]
    turn = np.divide(v.T @ skew @ v, sums, out=np.zeros((3, 3)),
                     where=sums > SINE_FLOOR)
    return angle, u @ turn @ v.T


def geodesic_loss(predicted, target, project=True):
    """Per-pair geodesic angles between ``(..., 3, 3)`` predictions and
    targets, as a ``(...)`` tensor.

    With ``project`` each prediction is first projected onto SO(3) and
    the gradient follows the projection. Without it the angle is read
    off the raw matrix through ``arccos((tr(targetᵀ m) - 1) / 2)``.
    """
    predicted = nx.constant(predicted)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape or predicted.shape[-2:] != (3, 3):
        raise ShapeError('geodesic_loss', predicted.shape, target.shape)
    raw = predicted.data
    surrogate = ((target * raw).sum(axis=(-2, -1)) - 1.0) / 2.0
    if not project:
        angles = np.arccos(np.clip(surrogate, -1.0, 1.0))

        def grad_fn(g):
            clipped = np.clip(surrogate, -ARCCOS_CLIP, ARCCOS_CLIP)
            # zero where the forward value sits on the clamp
            d_cos = np.where(np.abs(surrogate) >= 1.0, 0.0,
                             -1.0 / np.sqrt(1.0 - clipped ** 2))
            return ((g * d_cos / 2.0)[..., None, None] * target,)

        return nx.record(angles, (predicted,), grad_fn, 'geodesic')

    flat_raw = raw.reshape(-1, 3, 3)
    flat_target = target.reshape(-1, 3, 3)
    flat_surrogate = surrogate.reshape(-1)
    angles = np.empty(len(flat_raw))
    grads = np.zeros_like(flat_raw)
    for i, (m, rotation) in enumerate(zip(flat_raw, flat_target)):
        found = _projected_angle(m, rotation)
        if found is None:
            logger.warning("Rank-deficient rotation block in loss; "
                           "using the raw matrix without gradient")
            angles[i] = np.arccos(np.clip(flat_surrogate[i], -1.0, 1.0))
        else:
            angles[i], grads[i] = found
    angles = angles.reshape(surrogate.shape)
    grads = grads.reshape(raw.shape)

    def grad_fn(g):
        return (np.asarray(g)[..., None, None] * grads,)

    return nx.record(angles, (predicted,), grad_fn, 'geodesic')


def rotation_loss(predicted, target, project=True):
    """Geodesic angle averaged over every pair (and batch entry)."""
    return nx.mean(geodesic_loss(predicted, target, project=project))


def translation_loss(predicted, target):
    """Mean over pairs of the L1 distance between translations."""
    predicted = nx.constant(predicted)
    target = nx.constant(target)
    if predicted.shape != target.shape or predicted.shape[-1:] != (3,):
        raise ShapeError('translation_loss', predicted.shape, target.shape)
    pairs = max(predicted.size // 3, 1)
    return nx.scale(nx.total(nx.absolute(predicted - target)), 1.0 / pairs)


def total_loss(rot_loss, trans_loss, cfg):
    """``λ·rot_loss + γ·trans_loss``."""
    return (nx.scale(nx.constant(rot_loss), cfg.rotation_weight) +
            nx.scale(nx.constant(trans_loss), cfg.translation_weight))


LossTerms = collections.namedtuple(
    'LossTerms', ('rotation', 'translation', 'total'))


def pose_losses(raw, rotations, trans, head_config, loss_config):
    """Losses of raw head rows ``(..., T-1, width)`` against ground-truth
    relative rotations ``(..., T-1, 3, 3)`` and translations
    ``(..., T-1, 3)``.
    """
    representation = head_config.representation
    predicted = rotation_matrices(raw, representation)
    rot = rotation_loss(predicted, rotations,
                        project=representation == 'rotation_matrix')
    tr = translation_loss(translations(raw), trans)
    return LossTerms(rot, tr, total_loss(rot, tr, loss_config))


__all__ = (
    'ARCCOS_CLIP',
    'HeadConfig',
    'LossConfig',
    'LossTerms',
    'ROTATION_WIDTHS',
    'decode_poses',
    'euler_matrices',
    'geodesic_loss',
    'head_outputs',
    'identity_bias',
    'init_head',
    'pose_losses',
    'predict_poses',
    'quaternion_matrices',
    'rotation_loss',
    'rotation_matrices',
    'total_loss',
    'translation_loss',
    'translations',
)
