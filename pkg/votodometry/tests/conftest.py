# -*- coding: utf-8 -*-
import os

import pytest

from .testing import small_manifest


def pytest_addoption(parser):
    parser.addoption('--run-acceptance', action='store_true', default=False,
                     help="run the slow end-to-end acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--run-acceptance'):
        return
    skip = pytest.mark.skip(reason="needs --run-acceptance")
    for item in items:
        if 'acceptance' in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def clear_seed_env_var(monkeypatch):
    monkeypatch.delenv('VOT_SEED', raising=False)


@pytest.fixture
def config():
    from .testing import integration_test_settings
    return integration_test_settings()


@pytest.fixture(scope='session')
def dataset_dir(tmp_path_factory):
    """A generated dataset of three 5-frame 32x32 sequences."""
    from ..data import generate_dataset
    out_dir = str(tmp_path_factory.mktemp('dataset'))
    generate_dataset(small_manifest(), out_dir)
    return out_dir


@pytest.fixture
def model(config):
    from ..model import build_model
    return build_model(config, config.seed)


@pytest.fixture
def sequence_dir(dataset_dir):
    return os.path.join(dataset_dir, 'seq-000')


@pytest.fixture
def dataset(dataset_dir):
    from ..data import load_dataset
    return load_dataset(dataset_dir, (32, 32))
