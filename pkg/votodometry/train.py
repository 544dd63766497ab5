# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
AdamW, the warmup-cosine schedule and the training loop.

"""
import collections
import csv
import logging
import math
import os

import numpy as np

from . import numerics as nx
from .checkpoint import Checkpoint, apply_checkpoint, save_checkpoint
from .exceptions import ConfigurationError, NonFiniteGradient, NonFiniteLoss
from .head import LossConfig, pose_losses
from .model import encode_frames, forward, window_starts


BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
CURVE_COLUMNS = ('epoch', 'step', 'rot_loss', 'trans_loss', 'total', 'lr')

logger = logging.getLogger('votodometry')


_TrainConfig = collections.namedtuple(
    'TrainConfig',
    ('epochs', 'base_lr', 'warmup_epochs', 'batch_size', 'views', 'stride',
     'weight_decay', 'seed', 'loss', 'clip_norm', 'checkpoint_every'),
    defaults=(60, 3e-4, 6, 8, 4, 3, 0.01, 0, LossConfig(), 1.0, 1),
)


class TrainConfig(_TrainConfig):
    __slots__ = ()

    def validate(self):
        if self.epochs < 0:
            raise ConfigurationError('train.epochs', 'must not be negative')
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ConfigurationError('train.warmup_epochs',
                                     'must lie in [0, epochs]')
        for key in ('base_lr', 'batch_size', 'stride', 'checkpoint_every',
                    'clip_norm'):
            if not getattr(self, key) > 0:
                raise ConfigurationError('train.' + key, 'must be positive')
        if self.views < 2:
            raise ConfigurationError('train.views', 'must be at least 2')
        if self.weight_decay < 0:
            raise ConfigurationError('train.weight_decay',
                                     'must not be negative')
        self.loss.validate()
        return self


def lr_at(epoch, cfg):
    """Learning rate at a (fractional) epoch: linear warmup from 0 to
    ``base_lr``, then cosine decay to 0 at ``epochs``.
    """
    if cfg.epochs <= 0 or epoch >= cfg.epochs:
        return 0.0
    if epoch < cfg.warmup_epochs:
        return cfg.base_lr * epoch / cfg.warmup_epochs
    progress = (epoch - cfg.warmup_epochs) / (cfg.epochs - cfg.warmup_epochs)
    return cfg.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


class AdamState(object):
    """First and second moments plus the number of completed steps."""

    def __init__(self, params, step=0, m=None, v=None):
        self.step = step
        self.m = collections.OrderedDict(
            (name, np.zeros(t.shape) if m is None else m[name].copy())
            for name, t in params.items())
        self.v = collections.OrderedDict(
            (name, np.zeros(t.shape) if v is None else v[name].copy())
            for name, t in params.items())


def adamw_step(params, grads, moments, lr, weight_decay,
               betas=BETAS, eps=ADAM_EPS):
    """One decoupled-weight-decay Adam update, in place.

    Decay applies to matrices only (``ndim >= 2``). Every gradient is
    checked before any parameter changes.
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(name)
    beta1, beta2 = betas
    moments.step += 1
    correction1 = 1.0 - beta1 ** moments.step
    correction2 = 1.0 - beta2 ** moments.step
    for name, tensor in params.items():
        grad = grads[name]
        m = moments.m[name] = beta1 * moments.m[name] + (1.0 - beta1) * grad
        v = moments.v[name] = (beta2 * moments.v[name] +
                               (1.0 - beta2) * grad * grad)
        data = tensor.data
        if weight_decay and tensor.ndim >= 2:
            data = data - lr * weight_decay * data
        tensor.data = data - lr * (m / correction1) / (
            np.sqrt(v / correction2) + eps)
    return params, moments


def clip_gradients(grads, max_norm):
    """Scale ``grads`` so their global L2 norm is at most ``max_norm``.
    Returns the norm before clipping.
    """
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if norm > max_norm:
        factor = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * factor
    return norm


# ############ #
#   Batching   #
# ############ #

class TrainingWindows(object):
    """Every training window of ``views`` frames drawn from a dataset,
    with frozen features computed once.
    """

    def __init__(self, dataset, model, views):
        features, rotations, translations = [], [], []
        for sample in dataset:
            count = len(sample.frames)
            if count < views:
                continue
            for start in window_starts(count, views):
                rel = sample.rel_poses_gt[start:start + views - 1]
                features.append(encode_frames(
                    model, sample.frames[start:start + views]).data)
                rotations.append([pose.rotation.m for pose in rel])
                translations.append([pose.translation for pose in rel])
        self.features = np.array(features)
        self.rotations = np.array(rotations)
        self.translations = np.array(translations)

    def __len__(self):
        return len(self.features)

    def batch(self, indices):
        return (nx.Tensor(self.features[indices]),
                self.rotations[indices], self.translations[indices])


TrainResult = collections.namedtuple('TrainResult', ('checkpoint', 'curve'))


def _snapshot(model, moments, epoch, rng, config):
    m = collections.OrderedDict((k, a.copy()) for k, a in moments.m.items())
    v = collections.OrderedDict((k, a.copy()) for k, a in moments.v.items())
    return Checkpoint.from_model(
        model, (m, v), epoch, moments.step,
        rng.bit_generator.state, config)


def write_curve(curve, path):
    with open(path, 'w', newline='') as fb:
        writer = csv.writer(fb)
        writer.writerow(CURVE_COLUMNS)
        for row in curve:
            writer.writerow([row[column] for column in CURVE_COLUMNS])


def train_loop(dataset, model, cfg, output_dir=None, resume=None,
               config_snapshot=None):
    """Train ``model`` in place on a list of sequence samples.

    Returns a :class:`TrainResult` holding the final checkpoint and the
    loss curve (one dict per optimizer step). With ``output_dir`` the
    checkpoint ``checkpoint.votc`` and ``loss_curve.csv`` are written
    there every ``checkpoint_every`` epochs and at the end.
    ``resume`` is a :class:`Checkpoint` to continue from.
    """
    cfg = cfg.validate()
    params = model.parameters()
    rng = np.random.default_rng(cfg.seed)
    moments = AdamState(params)
    first_epoch = 0
    if resume is not None:
        apply_checkpoint(model, resume)
        moments = AdamState(params, resume.step, *resume.moments)
        rng.bit_generator.state = resume.rng_state
        first_epoch = resume.epoch
    snapshot = config_snapshot or {}

    windows = TrainingWindows(dataset, model, cfg.views)
    if cfg.epochs > first_epoch and not len(windows):
        raise ConfigurationError(
            'train.views', 'no sequence has {} frames'.format(cfg.views))
    batches = int(math.ceil(len(windows) / float(cfg.batch_size)))
    logger.info("Training on {} windows, {} batches per epoch, "
                "epochs {}..{}".format(len(windows), batches,
                                       first_epoch, cfg.epochs))

    curve = []
    for epoch in range(first_epoch, cfg.epochs):
        order = rng.permutation(len(windows))
        epoch_total = 0.0
        for b in range(batches):
            features, rotations, translations = windows.batch(
                order[b * cfg.batch_size:(b + 1) * cfg.batch_size])
            model.zero_grad()
            with nx.Tape() as tape:
                raw = forward(model, features=features).raw
                losses = pose_losses(raw, rotations, translations,
                                     model.head_config, cfg.loss)
            total = losses.total.item()
            if not math.isfinite(total):
                raise NonFiniteLoss(epoch, b)
            tape.backward(losses.total)
            grads = collections.OrderedDict(
                (name, np.zeros(t.shape) if t.grad is None else t.grad)
                for name, t in params.items())
            grad_norm = clip_gradients(grads, cfg.clip_norm)
            lr = lr_at(epoch + (b + 1) / float(batches), cfg)
            adamw_step(params, grads, moments, lr, cfg.weight_decay)
            row = {'epoch': epoch, 'step': moments.step,
                   'rot_loss': losses.rotation.item(),
                   'trans_loss': losses.translation.item(),
                   'total': total, 'lr': lr}
            curve.append(row)
            epoch_total += total
            logger.debug("step {step}: rot={rot_loss:.6f} "
                         "trans={trans_loss:.6f} total={total:.6f} "
                         "lr={lr:.3g} |g|={norm:.4f}"
                         .format(norm=grad_norm, **row))
        logger.info("Epoch {}/{}: mean loss {:.6f}".format(
            epoch + 1, cfg.epochs, epoch_total / max(batches, 1)))
        done = epoch + 1
        if output_dir and (done % cfg.checkpoint_every == 0 or
                           done == cfg.epochs):
            save_checkpoint(_snapshot(model, moments, done, rng, snapshot),
                            os.path.join(output_dir, 'checkpoint.votc'))

    checkpoint = _snapshot(model, moments, max(cfg.epochs, first_epoch),
                           rng, snapshot)
    if output_dir:
        if cfg.epochs <= first_epoch:
            save_checkpoint(checkpoint,
                            os.path.join(output_dir, 'checkpoint.votc'))
        write_curve(curve, os.path.join(output_dir, 'loss_curve.csv'))
    return TrainResult(checkpoint, curve)


__all__ = (
    'AdamState',
    'TrainConfig',
    'TrainResult',
    'TrainingWindows',
    'adamw_step',
    'clip_gradients',
    'lr_at',
    'train_loop',
    'write_curve',
)
