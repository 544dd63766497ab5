# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
import unittest

import numpy as np
import pytest

from votodometry import numerics as nx
from votodometry.encoder import (
    Encoder,
    EncoderConfig,
    encode,
    sinusoidal_encoding,
)
from votodometry.exceptions import ConfigurationError, PatchSizeError


class PatchifyTestCase(unittest.TestCase):

    @property
    def target(self):
        from ..encoder import patchify
        return patchify

    def test_shape(self):
        frame = np.zeros((32, 48, 3))
        self.assertEqual(self.target(frame, 16).shape, (6, 768))

    def test_row_major_patch_order(self):
        frame = np.arange(32 * 32, dtype=np.float64).reshape(32, 32, 1)
        patches = self.target(frame, 16)
        # patch 1 sits at row 0, column 1
        np.testing.assert_array_equal(patches[1, :16], frame[0, 16:32, 0])
        np.testing.assert_array_equal(patches[2, 16:32], frame[17, :16, 0])

    def test_stacked_frames(self):
        frames = np.random.default_rng(0).random((2, 3, 32, 32, 1))
        patches = self.target(frames, 16)
        self.assertEqual(patches.shape, (2, 3, 4, 256))
        np.testing.assert_array_equal(patches[1, 2],
                                      self.target(frames[1, 2], 16))

    def test_indivisible_size(self):
        with self.assertRaises(PatchSizeError) as caught:
            self.target(np.zeros((30, 32, 1)), 16)
        self.assertEqual(caught.exception.as_dict()['height'], 30)


class EncoderTestCase(unittest.TestCase):

    def make(self, **kwargs):
        settings = dict(patch_size=16, hidden_dim=8, frozen_layers=2,
                        heads=2, ff_dim=16, seed=3)
        settings.update(kwargs)
        return Encoder(EncoderConfig(**settings))

    def test_output_shape(self):
        frames = np.random.default_rng(1).random((3, 32, 64, 1))
        features = encode(frames, self.make())
        self.assertEqual(features.shape, (3, 8, 8))

    def test_deterministic_per_seed(self):
        frames = np.random.default_rng(2).random((2, 32, 32, 1))
        a = self.make().encode(frames).data
        b = self.make().encode(frames).data
        np.testing.assert_array_equal(a, b)
        c = self.make(seed=4).encode(frames).data
        self.assertFalse(np.allclose(a, c))

    def test_frozen_features_are_not_recorded(self):
        frames = np.random.default_rng(3).random((2, 32, 32, 1))
        with nx.Tape() as tape:
            features = self.make().encode(frames)
        self.assertEqual(len(tape), 0)
        self.assertFalse(features.tracked)
        for tensor in self.make().parameters().values():
            self.assertFalse(tensor.requires_grad)

    def test_frames_are_independent(self):
        rng = np.random.default_rng(4)
        frames = rng.random((2, 32, 32, 1))
        encoder = self.make()
        both = encoder.encode(frames).data
        alone = encoder.encode(frames[1:]).data
        np.testing.assert_allclose(both[1:], alone, atol=1e-12)

    def test_parameter_names(self):
        names = list(self.make(frozen_layers=1).parameters())
        self.assertEqual(names[0], 'encoder.embedding')
        self.assertIn('encoder.layers.0.query', names)
        self.assertIn('encoder.layers.0.norm2.bias', names)

    def test_heads_must_divide_width(self):
        with self.assertRaises(ConfigurationError):
            self.make(heads=3)


def test_sinusoidal_encoding():
    table = sinusoidal_encoding(5, 6)
    assert table.shape == (5, 6)
    np.testing.assert_allclose(table[0, 0::2], 0.0)
    np.testing.assert_allclose(table[0, 1::2], 1.0)
    np.testing.assert_allclose(table[3, 0], np.sin(3.0))


@pytest.mark.parametrize('channels', [1, 3])
def test_channel_count_sets_embedding_width(channels):
    encoder = Encoder(EncoderConfig(hidden_dim=8, heads=2, ff_dim=8),
                      channels=channels)
    assert encoder['embedding'].shape == (256 * channels, 8)
