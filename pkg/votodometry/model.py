# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
Assembly of the frozen encoder, the decoder, the camera embedding and
the pose head into one model.

"""
import collections

import numpy as np

from . import numerics as nx
from .decoder import decoder_forward, decoder_input, init_blocks
from .encoder import Encoder
from .exceptions import PredictionError, ShapeError
from .geometry import Pose, compose_relative
from .head import decode_poses, head_outputs, init_head


CAMERA_EMBEDDING_STD = 0.02


ModelOutput = collections.namedtuple(
    'ModelOutput', ('raw', 'camera_states', 'attention_maps'))


class VotModel(object):
    """Parameters and configuration of a whole odometry model."""

    def __init__(self, encoder, blocks, camera_embedding, head_weight,
                 head_bias, decoder_config, head_config, views=2):
        self.encoder = encoder
        self.blocks = blocks
        self.camera_embedding = camera_embedding
        self.head_weight = head_weight
        self.head_bias = head_bias
        self.encoder_config = encoder.config
        self.decoder_config = decoder_config
        self.head_config = head_config
        self.views = views

    def parameters(self):
        """Trainable tensors, by stable dotted name."""
        params = collections.OrderedDict()
        params['camera_embedding'] = self.camera_embedding
        for i, block in enumerate(self.blocks):
            for name, tensor in block.items():
                params['decoder.{}.{}'.format(i, name)] = tensor
        params['head.weight'] = self.head_weight
        params['head.bias'] = self.head_bias
        return params

    def frozen_parameters(self):
        return self.encoder.parameters()

    def zero_grad(self):
        for tensor in self.parameters().values():
            tensor.zero_grad()


def build_model(config, seed):
    """Deterministically initialize a model from a run configuration.

    ``config`` supplies ``encoder``, ``decoder``, ``head`` and
    ``data.channels``. The encoder draws from its own seed so every
    model built from one configuration shares the same frozen features.
    """
    decoder_config = config.decoder.validate()
    if config.encoder.hidden_dim != decoder_config.hidden_dim:
        raise ShapeError('build_model', (config.encoder.hidden_dim,),
                         (decoder_config.hidden_dim,))
    encoder = Encoder(config.encoder, channels=config.data.channels)
    rng = np.random.default_rng(seed)
    blocks = init_blocks(decoder_config, rng)
    camera_embedding = nx.parameter(
        rng.normal(0.0, CAMERA_EMBEDDING_STD, decoder_config.hidden_dim),
        name='camera_embedding')
    weight, bias = init_head(config.head.validate(),
                             decoder_config.hidden_dim, rng)
    return VotModel(encoder, blocks, camera_embedding, weight, bias,
                    decoder_config, config.head, views=config.data.views)


def encode_frames(model, frames):
    """Frozen features ``(..., T, h·w, d)`` of ``(..., T, H, W, C)``
    frames.
    """
    return model.encoder.encode(frames)


def forward(model, frames=None, features=None, with_attention=False):
    """Raw head rows ``(..., T-1, width)`` for frames or cached features."""
    if features is None:
        if frames is None:
            raise ValueError("forward needs frames or features")
        features = encode_frames(model, frames)
    tokens = decoder_input(features, model.camera_embedding)
    out = decoder_forward(tokens, model.decoder_config, model.blocks,
                          with_attention=with_attention)
    raw = head_outputs(out.camera_states, model.head_weight, model.head_bias)
    return ModelOutput(raw, out.camera_states, out.attention_maps)


def window_starts(frames, views):
    """First frame of each window of ``views`` frames over a sequence.

    Windows share their boundary frame; the last one is right-aligned to
    the end of the sequence. Sequences shorter than ``views`` form a
    single window.
    """
    if frames <= views:
        return [0]
    step = views - 1
    starts = list(range(0, frames - views + 1, step))
    if starts[-1] + views < frames:
        starts.append(frames - views)
    return starts


def predict_relative_poses(model, frames, views):
    """Relative poses between every pair of consecutive frames."""
    frames = np.asarray(frames, dtype=np.float64)
    count = len(frames)
    if count < 2:
        return []
    views = min(views, count)
    starts = window_starts(count, views)
    windows = np.stack([frames[s:s + views] for s in starts])
    with nx.no_tape():
        raw = forward(model, frames=windows).raw.data
    relatives = []
    for start, rows in zip(starts, raw):
        covered = len(relatives)
        try:
            poses = decode_poses(rows, model.head_config.representation)
        except PredictionError as exc:
            raise PredictionError(start + exc.as_dict()['frame'],
                                  exc.as_dict()['reason'])
        relatives.extend(poses[covered - start:])
    return relatives


def predict_trajectory(model, frames, timestamps=None, views=None):
    """Absolute trajectory of a frame sequence, starting at identity."""
    views = views or model.views
    relatives = predict_relative_poses(model, frames, views)
    return compose_relative(Pose.identity(), relatives, timestamps)


__all__ = (
    'ModelOutput',
    'VotModel',
    'build_model',
    'encode_frames',
    'forward',
    'predict_relative_poses',
    'predict_trajectory',
    'window_starts',
)
