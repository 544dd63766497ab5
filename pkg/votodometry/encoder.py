# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
The frozen image encoder.

Each frame is cut into non-overlapping ``p x p`` patches, projected with
a fixed random linear embedding, offset by a sinusoidal encoding of the
patch index and optionally passed through a few frozen pre-norm
self-attention layers. Nothing here ever receives a gradient.

"""
import collections
import math

import numpy as np

from . import numerics as nx
from .exceptions import ConfigurationError, PatchSizeError, ShapeError


_EncoderConfig = collections.namedtuple(
    'EncoderConfig',
    ('patch_size', 'hidden_dim', 'frozen_layers', 'heads', 'ff_dim',
     'seed', 'position_encoding'),
    defaults=(16, 64, 0, 4, 128, 0, True),
)


class EncoderConfig(_EncoderConfig):
    __slots__ = ()

    def validate(self):
        for key in ('patch_size', 'hidden_dim', 'heads', 'ff_dim'):
            if getattr(self, key) < 1:
                raise ConfigurationError('encoder.' + key, 'must be positive')
        if self.frozen_layers < 0:
            raise ConfigurationError('encoder.frozen_layers',
                                     'must not be negative')
        if self.hidden_dim % self.heads:
            raise ConfigurationError(
                'encoder.heads', 'must divide hidden_dim {}'
                .format(self.hidden_dim))
        return self


def sinusoidal_encoding(length, dim):
    """``(length, dim)`` table of sines (even channels) and cosines (odd
    channels) over geometrically spaced wavelengths.
    """
    positions = np.arange(length, dtype=np.float64)[:, None]
    rates = 1.0 / 10000.0 ** (np.arange(0, dim, 2, dtype=np.float64) / dim)
    angles = positions * rates
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, :dim // 2])
    return table


def _as_frames(frames):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[..., None]
    return frames


def patchify(frame, patch_size):
    """Cut an ``H x W x C`` raster (or a stack of them) into patches.

    Returns ``(..., h·w, p·p·C)``; row ``k`` holds the patch at
    ``(k // w, k % w)``, flattened row-major within the patch.
    """
    frame = _as_frames(frame)
    if frame.ndim < 3:
        raise ShapeError('patchify', frame.shape, ('H', 'W', 'C'))
    height, width, channels = frame.shape[-3:]
    p = patch_size
    if height % p or width % p:
        raise PatchSizeError(height, width, p)
    h, w = height // p, width // p
    lead = frame.shape[:-3]
    n = len(lead)
    blocks = frame.reshape(lead + (h, p, w, p, channels))
    axes = tuple(range(n)) + (n, n + 2, n + 1, n + 3, n + 4)
    return blocks.transpose(axes).reshape(lead + (h * w, p * p * channels))


class Encoder(object):
    """Deterministic, frozen patch encoder.

    :param config: an :class:`EncoderConfig`
    :param channels: number of raster channels (1 for PGM, 3 for PPM)
    """

    def __init__(self, config, channels=1):
        self.config = config.validate()
        self.channels = channels
        rng = np.random.default_rng(config.seed)
        d = config.hidden_dim
        in_dim = config.patch_size ** 2 * channels
        self.tensors = collections.OrderedDict()
        self._add('embedding',
                  rng.normal(0.0, 1.0 / math.sqrt(in_dim), (in_dim, d)))
        for i in range(config.frozen_layers):
            prefix = 'layers.{}.'.format(i)
            for name in ('query', 'key', 'value', 'out'):
                self._add(prefix + name,
                          rng.normal(0.0, 1.0 / math.sqrt(d), (d, d)))
            self._add(prefix + 'ff_in',
                      rng.normal(0.0, 1.0 / math.sqrt(d), (d, config.ff_dim)))
            self._add(prefix + 'ff_out',
                      rng.normal(0.0, 1.0 / math.sqrt(config.ff_dim),
                                 (config.ff_dim, d)))
            for norm in ('norm1', 'norm2'):
                self._add(prefix + norm + '.gain', np.ones(d))
                self._add(prefix + norm + '.bias', np.zeros(d))

    def _add(self, name, data):
        self.tensors['encoder.' + name] = nx.Tensor(data, name=name)

    def __getitem__(self, name):
        return self.tensors['encoder.' + name]

    def parameters(self):
        return self.tensors

    def embed(self, frames):
        """Linear patch embedding plus position encoding, as an array."""
        patches = patchify(frames, self.config.patch_size)
        if patches.shape[-1] != self['embedding'].shape[0]:
            raise ShapeError('encode', patches.shape,
                             self['embedding'].shape)
        tokens = patches @ self['embedding'].data
        if self.config.position_encoding:
            tokens = tokens + sinusoidal_encoding(tokens.shape[-2],
                                                  tokens.shape[-1])
        return tokens

    def _layer(self, x, i):
        prefix = 'layers.{}.'.format(i)
        normed = nx.layer_norm(x, self[prefix + 'norm1.gain'],
                               self[prefix + 'norm1.bias'])
        x = x + nx.multi_head_attention(
            normed, self[prefix + 'query'], self[prefix + 'key'],
            self[prefix + 'value'], self[prefix + 'out'], self.config.heads)
        normed = nx.layer_norm(x, self[prefix + 'norm2.gain'],
                               self[prefix + 'norm2.bias'])
        hidden = nx.gelu(nx.linear(normed, self[prefix + 'ff_in']))
        return x + nx.linear(hidden, self[prefix + 'ff_out'])

    def encode(self, frames):
        """``(..., T, H, W, C)`` frames to ``(..., T, h·w, d)`` features."""
        with nx.no_tape():
            x = nx.Tensor(self.embed(frames))
            for i in range(self.config.frozen_layers):
                x = self._layer(x, i)
        return nx.Tensor(x.data)


def encode(frames, encoder):
    return encoder.encode(frames)


__all__ = (
    'Encoder',
    'EncoderConfig',
    'encode',
    'patchify',
    'sinusoidal_encoding',
)
