# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
Run configuration.

A run is described by one TOML or JSON file::

    profile = "desk"             # or "paper"
    manifest = "manifest.json"   # relative to this file
    logging = "logging.yaml"

    [encoder]   patch_size, hidden_dim, frozen_layers, heads, ff_dim, seed
    [decoder]   layers, hidden_dim, heads, ff_dim, variant
    [head]      representation
    [loss]      rotation_weight, translation_weight
    [train]     epochs, base_lr, warmup_epochs, batch_size, seed, ...
    [data]      image_size, channels, views, stride, fps

Values missing from the file come from the profile. The ``VOT_SEED``
environment variable overrides ``train.seed``.

"""
import collections
import copy
import json
import logging
import logging.config
import os
import sys

import yaml

from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .exceptions import ConfigurationError, MissingFileError
from .head import HeadConfig, LossConfig
from .train import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


SEED_VARIABLE = 'VOT_SEED'
TOP_LEVEL_KEYS = ('profile', 'manifest', 'logging')
PATH_KEYS = ('manifest', 'logging')


_DataConfig = collections.namedtuple(
    'DataConfig', ('image_size', 'channels', 'views', 'stride', 'fps'),
    defaults=((64, 64), 1, 4, 3, 30.0),
)


class DataConfig(_DataConfig):
    __slots__ = ()

    def validate(self):
        if len(self.image_size) != 2 or min(self.image_size) < 1:
            raise ConfigurationError('data.image_size',
                                     'expected two positive sizes')
        if self.channels not in (1, 3):
            raise ConfigurationError('data.channels', 'must be 1 or 3')
        if self.views < 2:
            raise ConfigurationError('data.views', 'must be at least 2')
        if self.stride < 1:
            raise ConfigurationError('data.stride', 'must be positive')
        if not self.fps > 0:
            raise ConfigurationError('data.fps', 'must be positive')
        return self


SECTIONS = collections.OrderedDict([
    ('encoder', EncoderConfig),
    ('decoder', DecoderConfig),
    ('head', HeadConfig),
    ('loss', LossConfig),
    ('train', TrainConfig),
    ('data', DataConfig),
])

PROFILES = {
    'desk': {
        'encoder': {'patch_size': 16, 'hidden_dim': 64, 'frozen_layers': 1,
                    'heads': 4, 'ff_dim': 128},
        'decoder': {'layers': 4, 'hidden_dim': 64, 'heads': 4,
                    'ff_dim': 128},
        'train': {'epochs': 60, 'base_lr': 3e-4, 'warmup_epochs': 6,
                  'batch_size': 8},
        'data': {'image_size': [64, 64], 'channels': 1, 'views': 4,
                 'stride': 3},
    },
    'paper': {
        'encoder': {'patch_size': 16, 'hidden_dim': 768, 'frozen_layers': 12,
                    'heads': 12, 'ff_dim': 3072},
        'decoder': {'layers': 12, 'hidden_dim': 768, 'heads': 12,
                    'ff_dim': 3072},
        'train': {'epochs': 150, 'base_lr': 1e-5, 'warmup_epochs': 30,
                  'batch_size': 8},
        'data': {'image_size': [224, 224], 'channels': 3, 'views': 8,
                 'stride': 3},
    },
}


def expandvars_dict(settings):
    """Expands all environment variables in a (nested) settings mapping."""
    expanded = {}
    for key, value in settings.items():
        if isinstance(value, dict):
            value = expandvars_dict(value)
        elif isinstance(value, str):
            value = os.path.expandvars(value)
        expanded[key] = value
    return expanded


def _merge(base, update):
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text):
    """``section.key=value`` into ``('section.key', value)``.

    The value is read as JSON when it parses, else kept as a string.
    """
    key, sep, raw = text.partition('=')
    if not sep or not key.strip():
        raise ConfigurationError(text, 'expected section.key=value')
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return key.strip(), value


def _apply_overrides(settings, overrides):
    for key, value in (overrides or {}).items():
        section, _, name = key.partition('.')
        if not name:
            settings[section] = value
        else:
            settings.setdefault(section, {})[name] = value
    return settings


def _section(name, cls, values):
    values = dict(values)
    unknown = sorted(set(values) - (set(cls._fields) - {'loss'}))
    if unknown:
        raise ConfigurationError('{}.{}'.format(name, unknown[0]),
                                 'unknown key')
    if name == 'data' and 'image_size' in values:
        values['image_size'] = tuple(values['image_size'])
    return cls(**values)


class RunConfig(collections.namedtuple(
        'RunConfig', ('profile', 'manifest', 'logging') + tuple(SECTIONS))):
    """A validated, immutable run configuration."""
    __slots__ = ()

    @property
    def seed(self):
        return self.train.seed

    def validate(self):
        for name in SECTIONS:
            getattr(self, name).validate()
        height, width = self.data.image_size
        if height % self.encoder.patch_size or width % self.encoder.patch_size:
            raise ConfigurationError(
                'data.image_size', '{}x{} is not divisible by patch size {}'
                .format(height, width, self.encoder.patch_size))
        if self.encoder.hidden_dim != self.decoder.hidden_dim:
            raise ConfigurationError(
                'decoder.hidden_dim', 'must equal encoder.hidden_dim')
        return self

    def as_dict(self):
        """Plain mapping that :func:`configure` turns back into this."""
        settings = {'profile': self.profile}
        for key in PATH_KEYS:
            if getattr(self, key) is not None:
                settings[key] = getattr(self, key)
        for name in SECTIONS:
            values = getattr(self, name)._asdict()
            values.pop('loss', None)
            if name == 'data':
                values['image_size'] = list(values['image_size'])
            settings[name] = dict(values)
        return settings


def configure(settings, base_dir=None, overrides=None):
    """Validate a raw settings mapping into a :class:`RunConfig`.

    ``overrides`` maps dotted keys to values and wins over ``settings``.
    Relative paths resolve against ``base_dir``.
    """
    settings = _apply_overrides(expandvars_dict(settings), overrides)
    for key, value in settings.items():
        if key not in TOP_LEVEL_KEYS and key not in SECTIONS:
            raise ConfigurationError(key, 'unknown key')
        if key in SECTIONS and not isinstance(value, dict):
            raise ConfigurationError(key, 'expected a table')
    profile = settings.get('profile', 'desk')
    if profile not in PROFILES:
        raise ConfigurationError('profile', 'expected one of {}, got {!r}'
                                 .format(sorted(PROFILES), profile))
    merged = _merge(PROFILES[profile], settings)

    # views and stride are one setting shared by [data] and [train]
    train, data = merged.setdefault('train', {}), merged.setdefault('data', {})
    for key in ('views', 'stride'):
        if key in settings.get('train', {}):
            given = settings['train'][key]
            if key in settings.get('data', {}) and \
                    settings['data'][key] != given:
                raise ConfigurationError(
                    'train.' + key, 'differs from data.' + key)
            data[key] = given
        train[key] = data[key]
    seed = os.environ.get(SEED_VARIABLE)
    if seed:
        try:
            train['seed'] = int(seed)
        except ValueError:
            raise ConfigurationError(SEED_VARIABLE, 'not an integer')

    sections = {name: _section(name, cls, merged.get(name, {}))
                for name, cls in SECTIONS.items()}
    sections['train'] = sections['train']._replace(loss=sections['loss'])
    paths = {}
    for key in PATH_KEYS:
        value = merged.get(key)
        if value and base_dir and not os.path.isabs(value):
            value = os.path.normpath(os.path.join(base_dir, value))
        paths[key] = value
    return RunConfig(profile=profile, **dict(paths, **sections)).validate()


def load_settings(path):
    """Read a TOML or JSON settings file into a mapping."""
    if not os.path.exists(path):
        raise MissingFileError(path)
    try:
        if path.endswith('.json'):
            with open(path, 'r') as fb:
                return json.load(fb)
        with open(path, 'rb') as fb:
            return tomllib.load(fb)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(path, 'unreadable: {}'.format(exc))


def load_config(path=None, overrides=None, profile=None):
    """Load and validate a config file. Without ``path`` the profile
    defaults are used as they are.
    """
    settings, base_dir = {}, None
    if path is not None:
        settings = load_settings(path)
        base_dir = os.path.dirname(os.path.abspath(path))
    if profile is not None:
        settings['profile'] = profile
    return configure(settings, base_dir, overrides)


def write_effective_config(config, directory):
    """Echo the effective configuration into an output directory."""
    if not os.path.isdir(directory):
        os.makedirs(directory)
    path = os.path.join(directory, 'effective-config.json')
    with open(path, 'w') as fb:
        json.dump(config.as_dict(), fb, indent=2, sort_keys=True)
    return path


def setup_logging(path=None, level=logging.INFO):
    """Configure logging from a YAML ``dictConfig`` file, or log to the
    console at ``level`` when no file is given.
    """
    if path:
        if not os.path.exists(path):
            raise MissingFileError(path)
        with open(path, 'r') as fb:
            logging.config.dictConfig(yaml.safe_load(fb))
    else:
        logging.basicConfig(
            level=level,
            format='%(asctime)s %(levelname)-5.5s [%(name)s] %(message)s')


__all__ = (
    'DataConfig',
    'PROFILES',
    'RunConfig',
    'SEED_VARIABLE',
    'configure',
    'expandvars_dict',
    'load_config',
    'load_settings',
    'parse_override',
    'setup_logging',
    'write_effective_config',
)
