# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
import os


__all__ = (
    'TEST_DATA_DIR',
    'config_uri',
    'integration_test_settings',
    'small_manifest',
)


here = os.path.abspath(os.path.dirname(__file__))
TEST_DATA_DIR = os.path.join(here, 'data')


def config_uri():
    """Return the file path of the testing config uri"""
    config_uri = os.environ.get('TESTING_CONFIG', None)
    if config_uri is None:
        config_uri = os.path.join(here, 'testing.toml')
    return config_uri


def integration_test_settings(overrides=None):
    """The validated testing configuration"""
    from ..config import load_config
    return load_config(config_uri(), overrides)


def small_manifest(count=3, frames=5, seed=11, intrinsics='default'):
    """A manifest for a few tiny indoor sequences."""
    return {
        'image_size': [32, 32],
        'channels': 1,
        'stride': 1,
        'generate': [{
            'prefix': 'seq', 'count': count, 'seed': seed,
            'kind': 'indoor_wander', 'intrinsics': intrinsics,
            'frames': frames,
        }],
    }
