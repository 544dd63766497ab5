# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
import json
import os

import pytest

from votodometry import __version__
from votodometry.data import load_tum_trajectory

from ..testing import TEST_DATA_DIR, config_uri, small_manifest


TRAJECTORY = os.path.join(TEST_DATA_DIR, 'trajectory.txt')


@pytest.fixture
def target():
    from votodometry.scripts.vot import main
    return lambda *args: main(['vot'] + list(args))


def test_version(target, capsys):
    with pytest.raises(SystemExit) as caught:
        target('--version')
    assert caught.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_eval_identical(target, capsys):
    assert target('eval', TRAJECTORY, TRAJECTORY,
                  '--segment', 'per_frame_pair') == 0
    report = json.loads(capsys.readouterr().out)
    assert report['ate_m'] == 0.0
    assert report['are_deg'] < 1e-6
    assert report['rte_m'] == 0.0
    assert report['aligned'] is False
    assert report['segment_definition'] == 'per_frame_pair'


def test_eval_writes_json_and_csv(target, tmp_path, capsys):
    json_path, csv_path = tmp_path / 'm.json', tmp_path / 'm.csv'
    assert target('eval', TRAJECTORY, TRAJECTORY, '--align', 'sim3',
                  '--segment', 'per_frame_pair',
                  '--json', str(json_path), '--csv', str(csv_path)) == 0
    with json_path.open() as fb:
        written = json.load(fb)
    assert written['alignment'] == 'sim3'
    assert written['aligned'] is True
    assert csv_path.read_text().splitlines()[0].startswith('sequence')


def test_missing_file(target, tmp_path, capsys):
    missing = str(tmp_path / 'absent.txt')
    assert target('eval', missing, TRAJECTORY) == 2
    err = capsys.readouterr().err
    assert err.startswith('ERROR(2): ')
    assert missing in err


def test_trajectory_too_short_for_a_meter(target, capsys):
    assert target('eval', TRAJECTORY, TRAJECTORY) == 2
    assert capsys.readouterr().err.startswith('ERROR(16): ')


def test_bad_override(target, capsys):
    assert target('flops', '--set', 'decoder.layers') == 2
    assert capsys.readouterr().err.startswith('ERROR(1): ')


def test_unexpected_error(target, mocker, capsys):
    mocker.patch('votodometry.scripts.vot.evaluate',
                 side_effect=RuntimeError('boom'))
    assert target('eval', TRAJECTORY, TRAJECTORY) == 1
    assert capsys.readouterr().err.splitlines()[-1] == \
        'ERROR(0): RuntimeError: boom'


@pytest.mark.parametrize('args', [
    ('eval', TRAJECTORY, TRAJECTORY, '--bogus'),
    ('eval', TRAJECTORY),
    ('eval', TRAJECTORY, TRAJECTORY, '--align', 'affine'),
    ('teleport',),
    (),
])
def test_usage_errors(target, capsys, args):
    assert target(*args) == 2
    err = capsys.readouterr().err
    assert err.startswith('ERROR(1): ')
    assert len(err.splitlines()) == 1


def test_help_still_exits_cleanly(target, capsys):
    with pytest.raises(SystemExit) as caught:
        target('eval', '--help')
    assert caught.value.code == 0
    assert 'usage: vot eval' in capsys.readouterr().out


def test_flops_paper_profile(target, capsys):
    assert target('flops', '--profile', 'paper') == 0
    counts = json.loads(capsys.readouterr().out.splitlines()[0])
    assert counts['time_space'] < counts['full']
    assert counts['ratio'] < 0.6


def test_plot_trajectory(target, tmp_path):
    output = str(tmp_path / 'trajectory.svg')
    assert target('plot', 'trajectory', TRAJECTORY, TRAJECTORY,
                  output, '--title', 'sample') == 0
    assert '<svg' in open(output).read()


def test_pipeline(target, tmp_path, capsys):
    """gen-data, train, predict, eval and plot attention end to end."""
    manifest = tmp_path / 'manifest.json'
    manifest.write_text(json.dumps(small_manifest(count=2)))
    data_dir, out_dir = str(tmp_path / 'data'), str(tmp_path / 'run')

    assert target('gen-data', str(manifest), data_dir) == 0
    assert sorted(os.listdir(data_dir)) == [
        'effective-config.json', 'manifest.json', 'seq-000', 'seq-001']

    assert target('train', config_uri(), data_dir, out_dir,
                  '--set', 'train.epochs=1') == 0
    for name in ('checkpoint.votc', 'loss_curve.csv',
                 'effective-config.json'):
        assert os.path.exists(os.path.join(out_dir, name))
    with open(os.path.join(out_dir, 'effective-config.json')) as fb:
        assert json.load(fb)['train']['epochs'] == 1

    checkpoint = os.path.join(out_dir, 'checkpoint.votc')
    sequence = os.path.join(data_dir, 'seq-000')
    prediction = os.path.join(out_dir, 'seq-000.txt')
    assert target('predict', checkpoint, prediction,
                  '--images', sequence) == 0
    estimate = load_tum_trajectory(prediction)
    assert len(estimate) == 5

    capsys.readouterr()
    groundtruth = os.path.join(sequence, 'groundtruth.txt')
    assert target('eval', groundtruth, prediction,
                  '--segment', 'per_frame_pair') == 0
    report = json.loads(capsys.readouterr().out)
    assert report['ate_m'] >= 0.0

    attention_dir = str(tmp_path / 'attention')
    assert target('plot', 'attention', checkpoint, sequence,
                  attention_dir) == 0
    maps = [name for name in os.listdir(attention_dir)
            if name.endswith('.pgm')]
    assert len(maps) == 2 * 3 * 2


def test_predict_needs_a_source(target, tmp_path, capsys, config, model):
    from votodometry.checkpoint import Checkpoint, save_checkpoint
    from votodometry.train import AdamState
    moments = AdamState(model.parameters())
    path = str(tmp_path / 'model.votc')
    save_checkpoint(Checkpoint.from_model(
        model, (moments.m, moments.v), 0, 0, None, config.as_dict()), path)
    assert target('predict', path, str(tmp_path / 'out.txt')) == 2
    assert capsys.readouterr().err.startswith('ERROR(1): ')


def test_plot_attention_rejects_full_decoder(target, tmp_path, capsys,
                                             sequence_dir):
    from votodometry.checkpoint import Checkpoint, save_checkpoint
    from votodometry.model import build_model
    from votodometry.train import AdamState
    from ..testing import integration_test_settings
    config = integration_test_settings({'decoder.variant': 'full'})
    model = build_model(config, config.seed)
    moments = AdamState(model.parameters())
    path = str(tmp_path / 'model.votc')
    save_checkpoint(Checkpoint.from_model(
        model, (moments.m, moments.v), 0, 0, None, config.as_dict()), path)
    out_dir = tmp_path / 'attention'
    assert target('plot', 'attention', path, sequence_dir,
                  str(out_dir)) == 2
    err = capsys.readouterr().err
    assert err.startswith('ERROR(1): ')
    assert 'decoder.variant' in err
    assert not out_dir.exists()
