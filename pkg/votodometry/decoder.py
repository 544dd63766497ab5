# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
The time-space decoder.

Input features ``F`` of shape ``(..., T, h·w, d)`` get a camera token
prepended to every frame (``F₀``, ``(..., T, h·w+1, d)``). Each of the
``L`` pre-norm blocks then applies

1. temporal attention across the ``T`` frames at each patch position,
   skipping the camera rows, which pass through untouched;
2. spatial attention across the ``h·w + 1`` tokens of each frame,
   camera token included;
3. a GELU feed-forward layer.

The ``full`` variant replaces 1 and 2 with a single attention over all
``T·(h·w+1)`` tokens. In both variants the sinusoidal frame-index
encoding is added to the normalized rows that form the queries and keys
of the attention spanning frames; values and the residual stream never
see it.

"""
import collections
import math

import numpy as np

from . import numerics as nx
from .encoder import sinusoidal_encoding
from .exceptions import ConfigurationError, ShapeError


VARIANTS = ('time_space', 'full')

_DecoderConfig = collections.namedtuple(
    'DecoderConfig',
    ('layers', 'hidden_dim', 'heads', 'ff_dim', 'variant'),
    defaults=(4, 64, 4, 128, 'time_space'),
)


class DecoderConfig(_DecoderConfig):
    __slots__ = ()

    @property
    def head_dim(self):
        return self.hidden_dim // self.heads

    def validate(self):
        if self.layers < 0:
            raise ConfigurationError('decoder.layers', 'must not be negative')
        for key in ('hidden_dim', 'heads', 'ff_dim'):
            if getattr(self, key) < 1:
                raise ConfigurationError('decoder.' + key, 'must be positive')
        if self.hidden_dim % self.heads:
            raise ConfigurationError(
                'decoder.heads',
                'hidden_dim {} is not heads x head_dim'.format(
                    self.hidden_dim))
        if self.variant not in VARIANTS:
            raise ConfigurationError(
                'decoder.variant', 'expected one of {}, got {!r}'.format(
                    ', '.join(VARIANTS), self.variant))
        return self


class BlockParams(object):
    """The tensors of one decoder block, keyed by short name
    (``temporal.query``, ``spatial.out``, ``ff.in.bias``, ...).
    """

    def __init__(self, variant, tensors):
        self.variant = variant
        self.tensors = collections.OrderedDict(tensors)

    def __getitem__(self, name):
        return self.tensors[name]

    def items(self):
        return self.tensors.items()

    @classmethod
    def initialize(cls, config, rng):
        d, width, ff = config.hidden_dim, config.hidden_dim, config.ff_dim
        tensors = collections.OrderedDict()

        def weight(name, fan_in, fan_out):
            tensors[name] = nx.parameter(
                rng.normal(0.0, 1.0 / math.sqrt(fan_in), (fan_in, fan_out)),
                name=name)

        def norm(prefix):
            tensors[prefix + '.norm.gain'] = nx.parameter(np.ones(d))
            tensors[prefix + '.norm.bias'] = nx.parameter(np.zeros(d))

        if config.variant == 'time_space':
            attentions = ('temporal', 'spatial')
        else:
            attentions = ('full',)
        for prefix in attentions:
            norm(prefix)
            for name in ('query', 'key', 'value'):
                weight('{}.{}'.format(prefix, name), d, width)
            weight(prefix + '.out', width, d)
        norm('ff')
        weight('ff.in', d, ff)
        tensors['ff.in.bias'] = nx.parameter(np.zeros(ff))
        weight('ff.out', ff, d)
        tensors['ff.out.bias'] = nx.parameter(np.zeros(d))
        return cls(config.variant, tensors)


def init_blocks(config, rng):
    return [BlockParams.initialize(config, rng) for _ in range(config.layers)]


DecoderOutput = collections.namedtuple(
    'DecoderOutput', ('features', 'camera_states', 'attention_maps'))


def _layer_norm(x, params, prefix):
    return nx.layer_norm(x, params[prefix + '.norm.gain'],
                         params[prefix + '.norm.bias'])


def _attend(x, params, prefix, heads, qk_input=None, return_weights=False):
    return nx.multi_head_attention(
        x, params[prefix + '.query'], params[prefix + '.key'],
        params[prefix + '.value'], params[prefix + '.out'], heads,
        qk_input=qk_input, return_weights=return_weights)


def _with_encoding(x, table):
    """``x + table`` with ``table`` broadcast to ``x``'s shape."""
    return x + nx.constant(np.broadcast_to(table, x.shape).copy())


def decoder_input(features, camera_embedding):
    """Prepend the shared camera embedding to every frame.

    ``features`` is ``(..., T, h·w, d)``; the result is
    ``(..., T, h·w+1, d)`` with the camera token at spatial index 0.
    """
    features = nx.constant(features)
    if features.ndim < 3 or camera_embedding.shape != features.shape[-1:]:
        raise ShapeError('decoder_input', features.shape,
                         camera_embedding.shape)
    lead = features.shape[:-2]
    camera = nx.broadcast_to(camera_embedding,
                             lead + (1, features.shape[-1]))
    return nx.concat([camera, features], axis=-2)


def _temporal_tokens(normed, params, heads, frame_encoding=None,
                     prefix='temporal'):
    """Attention across frames for every patch position (camera rows
    excluded). Returns ``(..., T, h·w, d)``.
    """
    tokens = nx.swapaxes(normed[..., 1:, :], -2, -3)
    qk_input = None
    if frame_encoding is not None:
        qk_input = _with_encoding(tokens, frame_encoding)
    out = _attend(tokens, params, prefix, heads, qk_input=qk_input)
    return nx.swapaxes(out, -2, -3)


def temporal_attention(frames, params, heads, frame_encoding=None):
    """Multi-head attention along the frame axis of ``(..., T, h·w+1, d)``.

    Each patch position attends over its own ``T`` rows; row 0 (the
    camera token of each frame) is copied through unchanged.
    """
    frames = nx.constant(frames)
    tokens = _temporal_tokens(frames, params, heads, frame_encoding)
    return nx.concat([frames[..., :1, :], tokens], axis=-2)


def spatial_attention(frames, params, heads, return_weights=False):
    """Multi-head attention across the ``h·w + 1`` tokens of each frame.
    With ``return_weights`` the ``(..., T, heads, n, n)`` weights are
    returned too.
    """
    return _attend(nx.constant(frames), params, 'spatial', heads,
                   return_weights=return_weights)


def _full_attention(normed, params, heads, frame_encoding=None):
    shape = normed.shape
    frames, tokens, d = shape[-3:]
    flat = nx.reshape(normed, shape[:-3] + (frames * tokens, d))
    qk_input = None
    if frame_encoding is not None:
        table = np.repeat(frame_encoding, tokens, axis=0)
        qk_input = _with_encoding(flat, table)
    out = _attend(flat, params, 'full', heads, qk_input=qk_input)
    return nx.reshape(out, shape)


def _feed_forward(x, params):
    normed = _layer_norm(x, params, 'ff')
    hidden = nx.gelu(nx.linear(normed, params['ff.in'], params['ff.in.bias']))
    return nx.linear(hidden, params['ff.out'], params['ff.out.bias'])


def block_forward(x, params, config, frame_encoding=None,
                  with_attention=False):
    """One pre-norm block. Returns ``(x, camera attention rows or None)``."""
    rows = None
    if params.variant == 'time_space':
        normed = _layer_norm(x, params, 'temporal')
        update = _temporal_tokens(normed, params, config.heads,
                                  frame_encoding)
        x = nx.concat([x[..., :1, :], x[..., 1:, :] + update], axis=-2)
        normed = _layer_norm(x, params, 'spatial')
        update, weights = spatial_attention(normed, params, config.heads,
                                            return_weights=True)
        x = x + update
        if with_attention:
            rows = weights.data[..., 0, :].copy()
    else:
        normed = _layer_norm(x, params, 'full')
        x = x + _full_attention(normed, params, config.heads, frame_encoding)
    x = x + _feed_forward(x, params)
    return x, rows


def decoder_forward(frames, config, blocks, with_attention=False,
                    frame_encoding=True):
    """Run ``F₀`` through every block.

    Returns a :class:`DecoderOutput` whose ``camera_states`` are the
    final camera rows ``(..., T, d)``. With ``with_attention`` (time-space
    only) ``attention_maps`` lists, per layer, the camera token's spatial
    attention rows as an array ``(..., T, heads, h·w+1)``.
    """
    x = nx.constant(frames)
    if x.ndim < 3 or x.shape[-1] != config.hidden_dim:
        raise ShapeError('decoder_forward', x.shape,
                         ('T', 'h·w+1', config.hidden_dim))
    if len(blocks) != config.layers:
        raise ShapeError('decoder_forward', (len(blocks),), (config.layers,))
    table = None
    if frame_encoding:
        table = sinusoidal_encoding(x.shape[-3], x.shape[-1])
    maps = [] if with_attention and config.variant == 'time_space' else None
    for params in blocks:
        x, rows = block_forward(x, params, config, table,
                                with_attention=maps is not None)
        if maps is not None:
            maps.append(rows)
    return DecoderOutput(x, x[..., 0, :], maps)


def attention_grid(rows, height, width):
    """Reshape camera attention rows to ``h x w`` maps, dropping the
    camera column.
    """
    rows = np.asarray(rows)
    return rows[..., 1:].reshape(rows.shape[:-1] + (height, width))


# ################ #
#   FLOP counting  #
# ################ #

FlopCount = collections.namedtuple(
    'FlopCount',
    ('time_space', 'full', 'temporal', 'spatial',
     'projections_time_space', 'projections_full', 'feed_forward'))


def flops_matmul(m, n, p):
    """Cost of an ``(m x n) @ (n x p)`` product, counting a
    multiply-accumulate as two operations.
    """
    return 2 * m * n * p


def flops_attention_core(length, hidden_dim):
    """Score and weighted-value products of one attention over
    ``length`` tokens, all heads together. A single token costs nothing.
    """
    if length <= 1:
        return 0
    return 2 * flops_matmul(length, hidden_dim, length)


def count_flops(config, frames, tokens):
    """Analytic cost of the decoder for ``frames`` views of ``tokens``
    patches each.

    ``time_space`` and ``full`` are the score and value products of each
    variant over all layers. Query/key/value/output projections and the
    feed-forward layers are reported separately. Normalization and
    softmax are not counted.
    """
    d, layers = config.hidden_dim, config.layers
    per_frame = tokens + 1
    temporal = tokens * flops_attention_core(frames, d)
    spatial = frames * flops_attention_core(per_frame, d)
    full = flops_attention_core(frames * per_frame, d)
    projections_ts = (4 * flops_matmul(frames * tokens, d, d) +
                      4 * flops_matmul(frames * per_frame, d, d))
    projections_full = 4 * flops_matmul(frames * per_frame, d, d)
    feed_forward = 2 * flops_matmul(frames * per_frame, d, config.ff_dim)
    return FlopCount(
        time_space=layers * (temporal + spatial),
        full=layers * full,
        temporal=layers * temporal,
        spatial=layers * spatial,
        projections_time_space=layers * projections_ts,
        projections_full=layers * projections_full,
        feed_forward=layers * feed_forward,
    )


__all__ = (
    'BlockParams',
    'DecoderConfig',
    'DecoderOutput',
    'FlopCount',
    'VARIANTS',
    'attention_grid',
    'block_forward',
    'count_flops',
    'decoder_forward',
    'decoder_input',
    'flops_attention_core',
    'flops_matmul',
    'init_blocks',
    'spatial_attention',
    'temporal_attention',
)
