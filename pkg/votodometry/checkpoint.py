# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
Checkpoint container.

Layout::

    b'VOTCKPT1'                      magic, 8 bytes
    uint64 little-endian             length of the JSON header in bytes
    JSON header (utf-8)              tensors, epoch, step, rng_state, config
    raw little-endian float64 data   every tensor, in header order

Each header tensor entry holds ``name``, ``shape`` and ``offset`` (in
bytes from the start of the data section). Names are grouped by prefix:
trainable parameters use their model name, frozen encoder tensors start
with ``encoder.``, and optimizer moments with ``adam.m/`` and ``adam.v/``.

"""
import collections
import json
import logging
import os
import struct

import numpy as np

from .exceptions import CheckpointError, MissingFileError


MAGIC = b'VOTCKPT1'
_LENGTH = struct.Struct('<Q')
_DTYPE = np.dtype('<f8')

logger = logging.getLogger('votodometry')


class Checkpoint(object):
    """Everything needed to resume training bit for bit."""

    def __init__(self, parameters, frozen, moments, epoch, step,
                 rng_state, config):
        #: name -> float64 array of trainable parameters
        self.parameters = collections.OrderedDict(parameters)
        #: name -> float64 array of frozen encoder tensors
        self.frozen = collections.OrderedDict(frozen)
        #: ``(m, v)`` dicts of Adam moments, keyed like ``parameters``
        self.moments = moments
        self.epoch = epoch
        self.step = step
        self.rng_state = rng_state
        self.config = config

    @classmethod
    def from_model(cls, model, moments, epoch, step, rng_state, config):
        return cls(
            ((name, t.data.copy()) for name, t in model.parameters().items()),
            ((name, t.data.copy())
             for name, t in model.frozen_parameters().items()),
            moments, epoch, step, rng_state, config)

    def tensors(self):
        items = list(self.parameters.items()) + list(self.frozen.items())
        m, v = self.moments
        items += [('adam.m/' + name, value) for name, value in m.items()]
        items += [('adam.v/' + name, value) for name, value in v.items()]
        return items


def save_checkpoint(checkpoint, path):
    entries, blobs, offset = [], [], 0
    for name, value in checkpoint.tensors():
        data = np.ascontiguousarray(value, dtype=_DTYPE)
        entries.append({'name': name, 'shape': list(data.shape),
                        'offset': offset})
        blobs.append(data.tobytes())
        offset += data.nbytes
    header = json.dumps({
        'tensors': entries,
        'epoch': checkpoint.epoch,
        'step': checkpoint.step,
        'rng_state': checkpoint.rng_state,
        'config': checkpoint.config,
    }, sort_keys=True).encode('utf-8')
    tmp_path = '{}.tmp'.format(path)
    with open(tmp_path, 'wb') as fb:
        fb.write(MAGIC)
        fb.write(_LENGTH.pack(len(header)))
        fb.write(header)
        for blob in blobs:
            fb.write(blob)
    os.replace(tmp_path, path)
    logger.info("Wrote checkpoint {} (epoch {}, step {})"
                .format(path, checkpoint.epoch, checkpoint.step))


def load_checkpoint(path):
    if not os.path.exists(path):
        raise MissingFileError(path)
    with open(path, 'rb') as fb:
        content = fb.read()
    if content[:len(MAGIC)] != MAGIC:
        raise CheckpointError(path, 'not a VOTCKPT1 file')
    start = len(MAGIC) + _LENGTH.size
    if len(content) < start:
        raise CheckpointError(path, 'truncated header')
    (length,) = _LENGTH.unpack(content[len(MAGIC):start])
    try:
        header = json.loads(content[start:start + length].decode('utf-8'))
    except ValueError as exc:
        raise CheckpointError(path, 'unreadable header: {}'.format(exc))
    data = content[start + length:]

    parameters = collections.OrderedDict()
    frozen = collections.OrderedDict()
    m, v = collections.OrderedDict(), collections.OrderedDict()
    for entry in header['tensors']:
        shape = tuple(entry['shape'])
        count = int(np.prod(shape, dtype=np.int64))
        end = entry['offset'] + count * _DTYPE.itemsize
        if end > len(data):
            raise CheckpointError(path, "tensor '{}' is truncated"
                                        .format(entry['name']))
        value = np.frombuffer(data, dtype=_DTYPE, count=count,
                              offset=entry['offset']).reshape(shape).copy()
        name = entry['name']
        if name.startswith('adam.m/'):
            m[name[len('adam.m/'):]] = value
        elif name.startswith('adam.v/'):
            v[name[len('adam.v/'):]] = value
        elif name.startswith('encoder.'):
            frozen[name] = value
        else:
            parameters[name] = value
    return Checkpoint(parameters, frozen, (m, v), header['epoch'],
                      header['step'], header['rng_state'], header['config'])


def _check_tensors(path, expected, found, group):
    if list(expected) != list(found):
        missing = sorted(set(expected) - set(found))
        extra = sorted(set(found) - set(expected))
        raise CheckpointError(
            path, '{} tensors differ from the model (missing {}, extra {})'
            .format(group, missing, extra))
    for name, tensor in expected.items():
        if tensor.shape != found[name].shape:
            raise CheckpointError(
                path, "tensor '{}' has shape {}, the model expects {}"
                .format(name, found[name].shape, tensor.shape))


def apply_checkpoint(model, checkpoint, path='<checkpoint>'):
    """Copy checkpoint values into ``model`` after checking every name
    and shape against the model.
    """
    params = model.parameters()
    _check_tensors(path, params, checkpoint.parameters, 'trainable')
    _check_tensors(path, model.frozen_parameters(), checkpoint.frozen,
                   'frozen')
    for name, tensor in params.items():
        tensor.data = checkpoint.parameters[name].copy()
        tensor.zero_grad()
    for name, tensor in model.frozen_parameters().items():
        if not np.array_equal(tensor.data, checkpoint.frozen[name]):
            raise CheckpointError(
                path, "frozen tensor '{}' does not match this encoder "
                      "configuration".format(name))
    return model


__all__ = (
    'Checkpoint',
    'MAGIC',
    'apply_checkpoint',
    'load_checkpoint',
    'save_checkpoint',
)
