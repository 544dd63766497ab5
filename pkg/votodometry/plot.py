# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
Static figures: top-down trajectory plots (SVG) and camera-token
attention maps (PGM).

"""
import logging
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import numerics as nx  # noqa: E402
from .decoder import attention_grid  # noqa: E402
from .exceptions import ConfigurationError  # noqa: E402
from .images import write_raster  # noqa: E402
from .model import forward  # noqa: E402


logger = logging.getLogger('votodometry')


def plot_trajectories(gt, est, path, title=None):
    """Top-down (x, z) view of ground truth and estimate.

    Ground truth is drawn solid, the estimate dashed; both start at the
    square marker. Output is deterministic SVG.
    """
    matplotlib.rcParams['svg.hashsalt'] = 'vot-odometry'
    fig, ax = plt.subplots(figsize=(6, 6))
    try:
        for trajectory, style, label in ((gt, '-', 'ground truth'),
                                         (est, '--', 'estimate')):
            if trajectory is None:
                continue
            positions = trajectory.positions
            ax.plot(positions[:, 0], positions[:, 2], style, label=label)
        start = gt.positions[0]
        ax.plot([start[0]], [start[2]], 's', color='black', label='start')
        ax.set_xlabel('x [m]')
        ax.set_ylabel('z [m]')
        ax.set_aspect('equal', adjustable='datalim')
        ax.grid(True, alpha=0.3)
        ax.legend(loc='best')
        if title:
            ax.set_title(title)
        fig.savefig(path, format='svg', metadata={'Date': None})
    finally:
        plt.close(fig)
    logger.info("Wrote trajectory plot {}".format(path))
    return path


def attention_maps(model, frames):
    """Camera-token spatial attention of every layer for one window of
    frames, as ``(layers, T, heads, h, w)``.

    Only the time-space decoder has per-frame spatial attention; any
    other variant raises :class:`ConfigurationError`.
    """
    variant = model.decoder_config.variant
    if variant != 'time_space':
        raise ConfigurationError(
            'decoder.variant', "attention maps need the 'time_space' "
            "decoder, the model uses {!r}".format(variant))
    frames = np.asarray(frames, dtype=np.float64)
    height, width = frames.shape[-3:-1]
    patch = model.encoder_config.patch_size
    with nx.no_tape():
        maps = forward(model, frames=frames, with_attention=True)\
            .attention_maps
    grid = (height // patch, width // patch)
    if not maps:
        # no layers
        return np.zeros((0, len(frames), model.decoder_config.heads) + grid)
    return np.stack([attention_grid(rows, *grid) for rows in maps])


def upsample(grid, factor):
    return np.repeat(np.repeat(grid, factor, axis=-2), factor, axis=-1)


def write_attention_maps(maps, out_dir, patch_size):
    """One PGM per (layer, frame, head), scaled to its own maximum and
    blown up by ``patch_size`` to image resolution.
    """
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    paths = []
    for layer, per_frame in enumerate(maps):
        for frame, per_head in enumerate(per_frame):
            for head, grid in enumerate(per_head):
                peak = grid.max()
                image = upsample(grid / peak if peak > 0 else grid,
                                 patch_size)
                path = os.path.join(
                    out_dir, 'layer{:02d}-frame{:02d}-head{:02d}.pgm'
                    .format(layer, frame, head))
                write_raster(path, image)
                paths.append(path)
    logger.info("Wrote {} attention maps to {}".format(len(paths), out_dir))
    return paths


__all__ = (
    'attention_maps',
    'plot_trajectories',
    'upsample',
    'write_attention_maps',
)
