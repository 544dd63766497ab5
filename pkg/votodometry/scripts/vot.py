# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
The ``vot`` command: data generation, training, prediction, evaluation,
FLOP reporting and plots.

Errors raised on purpose end the command with exit status 2 and a single
line on stderr::

    ERROR(<code>): <message>

Usage errors are reported the same way with code 1. Anything unexpected
is logged with its traceback and ends with exit status 1 and
``ERROR(0): <type>: <message>``.

"""
import argparse
import json
import logging
import os
import sys
import time

from votodometry import __version__
from votodometry.checkpoint import apply_checkpoint, load_checkpoint
from votodometry.config import (
    configure,
    load_config,
    load_settings,
    parse_override,
    setup_logging,
    write_effective_config,
)
from votodometry.data import (
    generate_dataset,
    load_dataset,
    load_tum_trajectory,
    write_tum_trajectory,
)
from votodometry.decoder import count_flops
from votodometry.evaluation import (
    ALIGN_MODES,
    PER_METER,
    Segment,
    evaluate,
    write_metrics_csv,
)
from votodometry.exceptions import ConfigurationError, MissingFileError, \
    VotError
from votodometry.geometry import Trajectory
from votodometry.images import load_image_sequence
from votodometry.model import build_model, predict_trajectory
from votodometry.plot import (
    attention_maps,
    plot_trajectories,
    write_attention_maps,
)
from votodometry.train import train_loop


logger = logging.getLogger('vot')


def _overrides(args):
    return dict(parse_override(text) for text in (args.set or []))


def _run_config(args):
    config = load_config(args.config, _overrides(args),
                         getattr(args, 'profile', None))
    # --logging wins over the config's logging file
    if config.logging and not args.logging:
        setup_logging(config.logging)
    return config


def _model_from_checkpoint(path):
    checkpoint = load_checkpoint(path)
    config = configure(checkpoint.config)
    model = build_model(config, config.seed)
    apply_checkpoint(model, checkpoint, path)
    return model, config


def _frames_for(config, directory):
    frames, timestamps = load_image_sequence(
        directory, tuple(config.data.image_size))
    if len(frames) and frames.shape[-1] != config.data.channels:
        raise ConfigurationError(
            'data.channels', '{} holds {}-channel images, the model expects '
            '{}'.format(directory, frames.shape[-1], config.data.channels))
    return frames, timestamps


# ############### #
#   Subcommands   #
# ############### #

def gen_data(args):
    config = _run_config(args)
    manifest = load_settings(args.manifest)
    manifest.setdefault('image_size', list(config.data.image_size))
    manifest.setdefault('channels', config.data.channels)
    manifest.setdefault('stride', config.data.stride)
    manifest.setdefault('fps', config.data.fps)
    ids = generate_dataset(manifest, args.out_dir, workers=args.workers)
    write_effective_config(config, args.out_dir)
    logger.info("Generated {} sequences in {}".format(len(ids), args.out_dir))
    return 0


def train(args):
    config = _run_config(args)
    dataset = load_dataset(args.data_dir, tuple(config.data.image_size))
    model = build_model(config, config.seed)
    resume = load_checkpoint(args.resume) if args.resume else None
    write_effective_config(config, args.out_dir)
    result = train_loop(dataset, model, config.train, args.out_dir,
                        resume=resume, config_snapshot=config.as_dict())
    if result.curve:
        logger.info("Final loss {:.6f}".format(result.curve[-1]['total']))
    return 0


def predict(args):
    model, config = _model_from_checkpoint(args.checkpoint)
    if args.images:
        directory = args.images
    elif args.data_dir and args.sequence:
        directory = os.path.join(args.data_dir, args.sequence)
    else:
        raise ConfigurationError(
            'predict', 'give --images, or --data-dir with --sequence')
    frames, timestamps = _frames_for(config, directory)
    if not len(frames):
        raise MissingFileError(os.path.join(directory, '*.pgm'))
    started = time.perf_counter()
    trajectory = predict_trajectory(model, frames, timestamps)
    elapsed = time.perf_counter() - started
    logger.info("Predicted {} frames in {:.3f}s ({:.1f} frames/s)".format(
        len(frames), elapsed, len(frames) / max(elapsed, 1e-12)))
    out_dir = os.path.dirname(os.path.abspath(args.output))
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    write_tum_trajectory(trajectory, args.output)
    write_effective_config(config, out_dir)
    return 0


def eval_(args):
    gt = load_tum_trajectory(args.gt, truncate_invalid=args.truncate_invalid)
    est = load_tum_trajectory(args.est,
                              truncate_invalid=args.truncate_invalid)
    if args.truncate_invalid:
        count = min(len(gt), len(est))
        gt = Trajectory(gt.poses[:count], gt.timestamps[:count], args.gt)
        est = Trajectory(est.poses[:count], est.timestamps[:count], args.est)
    report = evaluate(gt, est, align=args.align,
                      segment=Segment.parse(args.segment),
                      reanchor=args.reanchor)
    print(report.to_json())
    if args.json:
        with open(args.json, 'w') as fb:
            json.dump(report.as_dict(), fb, indent=2, sort_keys=True)
    if args.csv:
        name = os.path.basename(os.path.dirname(os.path.abspath(args.est)))
        write_metrics_csv([(name, report)], args.csv)
    return 0


def flops(args):
    config = _run_config(args)
    height, width = config.data.image_size
    patch = config.encoder.patch_size
    counts = count_flops(config.decoder, config.data.views,
                         (height // patch) * (width // patch))
    ratio = counts.time_space / float(counts.full) if counts.full else 1.0
    print(json.dumps(dict(counts._asdict(), ratio=ratio), sort_keys=True))
    print("time_space={} full={} ratio={:.4f}".format(
        counts.time_space, counts.full, ratio))
    return 0


def plot_trajectory(args):
    gt = load_tum_trajectory(args.gt)
    est = load_tum_trajectory(args.est)
    plot_trajectories(gt, est, args.output, title=args.title)
    return 0


def plot_attention(args):
    model, config = _model_from_checkpoint(args.checkpoint)
    frames, _ = _frames_for(config, args.sequence_dir)
    views = config.data.views
    window = frames[args.start:args.start + views]
    if len(window) < 2:
        raise ConfigurationError(
            'start', 'fewer than 2 frames from index {}'.format(args.start))
    maps = attention_maps(model, window)
    write_attention_maps(maps, args.out_dir, config.encoder.patch_size)
    write_effective_config(config, args.out_dir)
    return 0


# ########## #
#   Parser   #
# ########## #

class VotArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as :class:`ConfigurationError` (``ERROR(1)``)
    instead of exiting.
    """

    def error(self, message):
        raise ConfigurationError(self.prog, message)


def _config_options(parser):
    parser.add_argument('--config', help="TOML or JSON run configuration")
    parser.add_argument('--profile', choices=('desk', 'paper'),
                        help="profile defaults to start from")
    parser.add_argument('--set', action='append', metavar='SECTION.KEY=VALUE',
                        help="override one configuration value")


def make_parser():
    common = VotArgumentParser(add_help=False)
    common.add_argument('--logging', metavar='PATH',
                        help="logging.yaml dictConfig file")
    common.add_argument('-v', '--verbose', action='store_true',
                        help="log at DEBUG without a logging file")

    parser = VotArgumentParser(
        prog='vot', description="Visual odometry with a frozen encoder and "
                                "a time-space attention decoder.")
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    sub = commands.add_parser('gen-data', parents=[common],
                              help="render a synthetic dataset")
    sub.add_argument('manifest')
    sub.add_argument('out_dir')
    sub.add_argument('--workers', type=int, default=1)
    _config_options(sub)
    sub.set_defaults(func=gen_data)

    sub = commands.add_parser('train', parents=[common],
                              help="train the decoder and head")
    sub.add_argument('config')
    sub.add_argument('data_dir')
    sub.add_argument('out_dir')
    sub.add_argument('--resume', metavar='CHECKPOINT')
    sub.add_argument('--set', action='append', metavar='SECTION.KEY=VALUE')
    sub.set_defaults(func=train)

    sub = commands.add_parser('predict', parents=[common],
                              help="predict a TUM trajectory")
    sub.add_argument('checkpoint')
    sub.add_argument('output')
    sub.add_argument('--images', metavar='DIR')
    sub.add_argument('--data-dir')
    sub.add_argument('--sequence')
    sub.set_defaults(func=predict)

    sub = commands.add_parser('eval', parents=[common],
                              help="compare two TUM trajectories")
    sub.add_argument('gt')
    sub.add_argument('est')
    sub.add_argument('--align', choices=ALIGN_MODES)
    sub.add_argument('--segment', default=str(PER_METER),
                     help="per_frame_pair or per_meter[:L] (default "
                          "%(default)s)")
    sub.add_argument('--reanchor', action='store_true',
                     help="express both trajectories relative to their "
                          "first pose")
    sub.add_argument('--truncate-invalid', action='store_true')
    sub.add_argument('--json', metavar='PATH')
    sub.add_argument('--csv', metavar='PATH')
    sub.set_defaults(func=eval_)

    sub = commands.add_parser('flops', parents=[common],
                              help="attention cost of both decoder variants")
    _config_options(sub)
    sub.set_defaults(func=flops)

    sub = commands.add_parser('plot', help="emit figures")
    plots = sub.add_subparsers(dest='figure', metavar='FIGURE')
    plots.required = True
    fig = plots.add_parser('trajectory', parents=[common])
    fig.add_argument('gt')
    fig.add_argument('est')
    fig.add_argument('output')
    fig.add_argument('--title')
    fig.set_defaults(func=plot_trajectory)
    fig = plots.add_parser('attention', parents=[common])
    fig.add_argument('checkpoint')
    fig.add_argument('sequence_dir')
    fig.add_argument('out_dir')
    fig.add_argument('--start', type=int, default=0)
    fig.set_defaults(func=plot_attention)
    return parser


def _report(code, message):
    print('ERROR({}): {}'.format(code, ' '.join(message.split())),
          file=sys.stderr)


def main(argv=sys.argv):
    try:
        args = make_parser().parse_args(argv[1:])
        setup_logging(args.logging,
                      logging.DEBUG if args.verbose else logging.INFO)
        return args.func(args)
    except VotError as exc:
        _report(exc.code, exc.message)
        return 2
    except Exception as exc:
        logger.exception('Logging an uncaught exception')
        _report(VotError.code, '{}: {}'.format(type(exc).__name__, exc))
        return 1


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main())
