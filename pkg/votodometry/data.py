# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
Synthetic sequences and trajectory files.

Cameras look along ``+z`` with ``x`` to the right and ``y`` down. A point
``p`` in camera coordinates lands on pixel ``(u, v)`` with
``u = fx·x/z + cx`` and ``v = fy·y/z + cy``; pixel ``(row, col)`` sits at
coordinate ``(v, u) = (row, col)``.

A generated dataset directory looks like::

    manifest.json
    <sequence id>/
        groundtruth.txt          TUM trajectory, first pose at identity
        <timestamp>.pgm          one 8-bit raster per frame (.ppm if RGB)

"""
import collections
import concurrent.futures
import json
import logging
import math
import os

import numpy as np

from .exceptions import (
    ConfigurationError,
    LengthMismatch,
    MissingFileError,
    SampleRejected,
    TrajectoryFormatError,
)
from .geometry import (
    Pose,
    Rotation,
    Trajectory,
    axis_angle_to_rot,
    compose_relative,
    quat_to_rot,
    relative_poses,
    rot_to_quat,
)
from .images import load_image_sequence, write_raster


NEAR_PLANE = 0.05
MAX_TRANSLATION = 1.5
MAX_ATTEMPTS = 20
MIN_VISIBLE_POINTS = 50
SPLAT_EXTENT = 4.0
DEFAULT_FPS = 30.0
TRAJECTORY_KINDS = ('indoor_wander', 'forward_dominant')
INTRINSICS_PROFILES = ('default', 'wide', 'tele')
GROUNDTRUTH = 'groundtruth.txt'
MANIFEST = 'manifest.json'

logger = logging.getLogger('votodometry')


Intrinsics = collections.namedtuple('Intrinsics', ('fx', 'fy', 'cx', 'cy'))


def intrinsics_profile(name, height, width):
    """Pinhole intrinsics for a named calibration profile."""
    if name == 'default':
        return Intrinsics(float(width), float(width), width / 2.0,
                          height / 2.0)
    if name == 'wide':
        return Intrinsics(0.6 * width, 0.6 * width, width / 2.0,
                          height / 2.0)
    if name == 'tele':
        return Intrinsics(1.4 * width, 1.4 * width, 0.55 * width,
                          0.55 * height)
    raise ConfigurationError('intrinsics', 'unknown profile {!r}'.format(name))


# ########## #
#   Worlds   #
# ########## #

class World(object):
    """A static cloud of Gaussian splats.

    ``radii`` are splat standard deviations in pixels at unit depth.
    ``tints`` scale each point's intensity per color channel.
    """

    def __init__(self, points, intensities, radii, background=0.0,
                 seed=None, tints=None):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.intensities = np.asarray(intensities, dtype=np.float64)
        self.radii = np.asarray(radii, dtype=np.float64)
        if tints is None:
            tints = np.ones((len(self.points), 3))
        self.tints = np.asarray(tints, dtype=np.float64)
        self.background = float(background)
        self.seed = seed

    def __len__(self):
        return len(self.points)

    def transformed(self, pose):
        """The same world moved rigidly by ``pose``."""
        return World(pose.transform_points(self.points), self.intensities,
                     self.radii, self.background, self.seed, self.tints)


def _room_points(rng, count, half_width, half_height, near, far):
    faces = rng.integers(0, 6, count)
    u, v = rng.random(count), rng.random(count)
    x = (2 * u - 1) * half_width
    y = (2 * v - 1) * half_height
    z = near + (far - near) * rng.random(count)
    points = np.stack([x, y, z], axis=1)
    points[faces == 0, 0] = -half_width
    points[faces == 1, 0] = half_width
    points[faces == 2, 1] = -half_height
    points[faces == 3, 1] = half_height
    points[faces == 4, 2] = near
    points[faces == 5, 2] = far
    return points


def make_world(seed, kind='indoor_wander', extent=4.0, count=600,
               background=0.05):
    """A random world suited to a trajectory kind.

    ``indoor_wander`` gets a closed room around the origin, about
    ``2·extent`` wide, with some clutter inside. ``forward_dominant`` gets
    a street corridor with walls and ground running ``extent`` meters
    along ``+z``.
    """
    rng = np.random.default_rng(seed)
    if kind == 'indoor_wander':
        shell = _room_points(rng, count * 3 // 4, extent, extent * 0.4,
                             -extent, extent * 1.5)
        clutter = rng.uniform((-extent, -extent * 0.4, 1.0),
                              (extent, extent * 0.4, extent * 1.5),
                              (count - len(shell), 3))
        points = np.concatenate([shell, clutter])
    elif kind == 'forward_dominant':
        half_width, ground = 3.0, 1.6
        side = rng.integers(0, 3, count)
        z = rng.uniform(-5.0, extent + 20.0, count)
        y = rng.uniform(-3.0, ground, count)
        x = rng.choice((-half_width, half_width), count)
        x = np.where(side == 2, rng.uniform(-half_width, half_width, count), x)
        y = np.where(side == 2, ground, y)
        points = np.stack([x, y, z], axis=1)
    else:
        raise ConfigurationError('kind', 'unknown trajectory kind {!r}'
                                 .format(kind))
    intensities = rng.uniform(0.4, 1.0, len(points))
    radii = rng.uniform(2.0, 5.0, len(points))
    tints = rng.uniform(0.3, 1.0, (len(points), 3))
    world = World(points, intensities, radii, background, seed, tints)
    visible = np.count_nonzero(world.points[:, 2] > NEAR_PLANE)
    if visible < MIN_VISIBLE_POINTS:
        raise ConfigurationError(
            'world', 'only {} points in front of the start pose'
            .format(visible))
    return world


def render(world, pose, intrinsics, height, width, channels=1):
    """Render ``world`` seen from ``pose`` (world-from-camera).

    Each point in front of the near plane becomes an isotropic Gaussian
    of standard deviation ``radius / z`` pixels. Contributions add on
    top of the background and are clipped to ``[0, 1]``.
    """
    camera = pose.inverse().transform_points(world.points)
    z = camera[:, 2]
    front = z > NEAR_PLANE
    z = np.where(front, z, 1.0)
    u = intrinsics.fx * camera[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * camera[:, 1] / z + intrinsics.cy
    sigma = world.radii / z
    reach = SPLAT_EXTENT * sigma
    keep = (front & (u > -reach) & (u < width - 1 + reach) &
            (v > -reach) & (v < height - 1 + reach))
    u, v, sigma = u[keep], v[keep], sigma[keep]
    cols = np.arange(width, dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)
    gx = np.exp(-(cols[None, :] - u[:, None]) ** 2 /
                (2.0 * sigma[:, None] ** 2))
    gy = np.exp(-(rows[None, :] - v[:, None]) ** 2 /
                (2.0 * sigma[:, None] ** 2))
    weights = world.intensities[keep][:, None]
    if channels == 3:
        weights = weights * world.tints[keep]
    elif channels != 1:
        raise ConfigurationError('data.channels', 'must be 1 or 3')
    image = np.einsum('nc,nh,nw->hwc', weights, gy, gx)
    return np.clip(world.background + image, 0.0, 1.0)


# ################ #
#   Trajectories   #
# ################ #

def _rotation_vector(vector):
    angle = np.linalg.norm(vector)
    if angle < 1e-12:
        return Rotation.identity()
    return axis_angle_to_rot(vector, angle)


def _clip_norm(vector, limit):
    norm = np.linalg.norm(vector)
    return vector * (limit / norm) if norm > limit else vector


def sample_trajectory(kind, length, seed):
    """``length`` smooth world-from-camera poses starting at identity.

    ``indoor_wander`` is a damped random walk of camera-frame velocities
    (at most 5° and 0.15 m per step). ``forward_dominant`` drives along
    ``+z`` at 0.5 to 1.5 m per step with a slowly varying yaw.
    """
    if length < 1:
        raise ValueError("trajectory length must be at least 1")
    if kind not in TRAJECTORY_KINDS:
        raise ConfigurationError('kind', 'unknown trajectory kind {!r}'
                                 .format(kind))
    rng = np.random.default_rng(seed)
    poses = [Pose.identity()]
    if kind == 'indoor_wander':
        max_angle, max_step = math.radians(5.0), 0.15
        omega = np.zeros(3)
        velocity = np.array([0.0, 0.0, 0.05])
        for _ in range(length - 1):
            omega = 0.8 * omega + 0.2 * rng.normal(0.0, max_angle, 3)
            omega = _clip_norm(omega, max_angle)
            velocity = (0.8 * velocity +
                        0.2 * rng.normal((0.0, 0.0, 0.03), max_step, 3))
            velocity = _clip_norm(velocity, max_step)
            step = Pose(_rotation_vector(omega), velocity)
            poses.append(poses[-1].compose(step))
    else:
        speed = rng.uniform(0.7, 1.3)
        yaw_rate = 0.0
        max_yaw = math.radians(2.0)
        for _ in range(length - 1):
            speed = float(np.clip(speed + rng.normal(0.0, 0.05), 0.5, 1.5))
            yaw_rate = float(np.clip(
                0.9 * yaw_rate + rng.normal(0.0, math.radians(0.3)),
                -max_yaw, max_yaw))
            lateral = rng.normal(0.0, 0.01)
            step = Pose(_rotation_vector(np.array([0.0, yaw_rate, 0.0])),
                        np.array([lateral, 0.0, speed]))
            poses.append(poses[-1].compose(step))
    return poses


# ############# #
#   Sequences   #
# ############# #

class SequenceSample(object):
    """Frames ``(T, H, W, C)`` with their ground truth.

    ``rel_poses_gt[k]`` takes frame ``k`` to frame ``k + 1``.
    """

    def __init__(self, frames, rel_poses_gt, abs_poses_gt, timestamps,
                 intrinsics=None, sequence_id=None):
        self.frames = np.asarray(frames, dtype=np.float64)
        self.rel_poses_gt = list(rel_poses_gt)
        self.abs_poses_gt = list(abs_poses_gt)
        self.timestamps = np.asarray(timestamps, dtype=np.float64)
        self.intrinsics = intrinsics
        self.sequence_id = sequence_id
        if not (len(self.frames) == len(self.abs_poses_gt) ==
                len(self.timestamps) == len(self.rel_poses_gt) + 1):
            raise LengthMismatch(len(self.frames), len(self.abs_poses_gt))

    def __len__(self):
        return len(self.frames)

    @property
    def trajectory(self):
        return Trajectory(self.abs_poses_gt, self.timestamps)

    def max_compose_error(self):
        """Largest deviation between the absolute poses and the chain of
        relatives composed from the first one.
        """
        chain = compose_relative(self.abs_poses_gt[0], self.rel_poses_gt)
        return max(
            max(np.abs(a.rotation.m - b.rotation.m).max(),
                np.abs(a.translation - b.translation).max())
            for a, b in zip(chain, self.abs_poses_gt))


def make_sequence(world, trajectory, views, stride, start, intrinsics,
                  height, width, channels=1, fps=DEFAULT_FPS,
                  max_translation=MAX_TRANSLATION):
    """Render ``views`` frames taken every ``stride`` poses from ``start``.

    Raises :class:`SampleRejected` if any sampled step translates more
    than ``max_translation`` meters; the caller draws again.
    """
    trajectory = list(trajectory)
    last = start + (views - 1) * stride
    if start < 0 or views < 1 or stride < 1 or last >= len(trajectory):
        raise ValueError(
            "cannot take {} views at stride {} from index {} of a {}-pose "
            "trajectory".format(views, stride, start, len(trajectory)))
    indices = list(range(start, last + 1, stride))
    abs_poses = [trajectory[i] for i in indices]
    rel_poses = relative_poses(abs_poses)
    for k, rel in enumerate(rel_poses):
        magnitude = np.linalg.norm(rel.translation)
        if magnitude > max_translation:
            raise SampleRejected(k, magnitude, max_translation)
    frames = np.stack([render(world, pose, intrinsics, height, width,
                              channels)
                       for pose in abs_poses])
    timestamps = np.array(indices, dtype=np.float64) / fps
    return SequenceSample(frames, rel_poses, abs_poses, timestamps,
                          intrinsics)


# ###################### #
#   TUM trajectory files #
# ###################### #

def truncate_at_invalid(rows):
    """Keep TUM rows ``(N, 8)`` up to the first one holding a non-finite
    value or a zero quaternion.
    """
    rows = np.asarray(rows, dtype=np.float64).reshape(-1, 8)
    finite = np.all(np.isfinite(rows), axis=1)
    nonzero = np.linalg.norm(np.nan_to_num(rows[:, 4:]), axis=1) > 0
    bad = np.flatnonzero(~(finite & nonzero))
    return rows[:bad[0]] if len(bad) else rows


def read_tum_rows(path):
    """Parse ``timestamp tx ty tz qx qy qz qw`` lines into an ``(N, 8)``
    array. Blank lines and ``#`` comments are skipped.
    """
    if not os.path.exists(path):
        raise MissingFileError(path)
    rows = []
    with open(path, 'r') as fb:
        for number, line in enumerate(fb, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise TrajectoryFormatError(
                    path, number, 'expected 8 fields, found {}'
                    .format(len(parts)))
            try:
                rows.append([float(part) for part in parts])
            except ValueError as exc:
                raise TrajectoryFormatError(path, number, str(exc))
    return np.array(rows, dtype=np.float64).reshape(-1, 8)


def load_tum_trajectory(path, truncate_invalid=False):
    rows = read_tum_rows(path)
    if truncate_invalid:
        kept = truncate_at_invalid(rows)
        if len(kept) < len(rows):
            logger.warning("Truncated {} at pose {} (invalid value)"
                           .format(path, len(kept)))
        rows = kept
    if not len(rows):
        raise TrajectoryFormatError(path, 0, 'no poses')
    poses = []
    for index, row in enumerate(rows):
        if not np.all(np.isfinite(row)):
            raise TrajectoryFormatError(path, index + 1, 'non-finite value')
        qx, qy, qz, qw = row[4:]
        try:
            rotation = quat_to_rot((qw, qx, qy, qz))
        except ValueError as exc:
            raise TrajectoryFormatError(path, index + 1, str(exc))
        poses.append(Pose(rotation, row[1:4]))
    return Trajectory(poses, rows[:, 0], source=path)


def write_tum_trajectory(trajectory, path):
    with open(path, 'w') as fb:
        fb.write('# timestamp tx ty tz qx qy qz qw\n')
        for timestamp, pose in zip(trajectory.timestamps, trajectory):
            w, x, y, z = rot_to_quat(pose.rotation)
            values = (timestamp,) + tuple(pose.translation) + (x, y, z, w)
            fb.write(' '.join('{:.17g}'.format(v) for v in values) + '\n')


# ############ #
#   Datasets   #
# ############ #

DATASET_DEFAULTS = {
    'image_size': [64, 64],
    'channels': 1,
    'stride': 3,
    'fps': DEFAULT_FPS,
}
SEQUENCE_DEFAULTS = {
    'kind': 'indoor_wander',
    'intrinsics': 'default',
    'frames': 4,
    'start': 0,
}
# taken from a generate block when given, else the dataset value applies
SEQUENCE_OPTIONS = ('stride',)


def _derived_seed(seed, attempt):
    if attempt == 0:
        return int(seed)
    return int(np.random.SeedSequence([int(seed), attempt])
               .generate_state(1)[0])


def expand_manifest(manifest):
    """Resolve defaults and ``generate`` blocks into explicit entries.

    A generate block ``{prefix, count, seed, kind, intrinsics, frames}``
    becomes ``count`` sequences ``<prefix>-<nnn>`` whose world and
    trajectory seeds are drawn from ``seed``. A block (or a sequence)
    may carry its own ``stride``; otherwise the dataset stride applies.
    """
    expanded = dict(DATASET_DEFAULTS)
    expanded.update((key, value) for key, value in manifest.items()
                    if key not in ('sequences', 'generate'))
    sequences = []
    for entry in manifest.get('sequences', []):
        item = dict(SEQUENCE_DEFAULTS)
        item.update(entry)
        for key in ('id', 'world_seed', 'trajectory_seed'):
            if key not in item:
                raise ConfigurationError('sequences.' + key, 'is required')
        sequences.append(item)
    for block in manifest.get('generate', []):
        rng = np.random.default_rng(block.get('seed', 0))
        prefix = block.get('prefix', 'seq')
        for i in range(block.get('count', 1)):
            world_seed, trajectory_seed = rng.integers(0, 2 ** 31 - 1, 2)
            item = dict(SEQUENCE_DEFAULTS)
            item.update((key, value) for key, value in block.items()
                        if key in SEQUENCE_DEFAULTS or
                        key in SEQUENCE_OPTIONS)
            item.update(id='{}-{:03d}'.format(prefix, i),
                        world_seed=int(world_seed),
                        trajectory_seed=int(trajectory_seed))
            sequences.append(item)
    for item in sequences:
        stride = item.get('stride', expanded['stride'])
        if not isinstance(stride, int) or isinstance(stride, bool) or \
                stride < 1:
            raise ConfigurationError(
                'stride', 'must be a positive integer, got {!r} for {}'
                .format(stride, item['id']))
    ids = [item['id'] for item in sequences]
    if len(set(ids)) != len(ids):
        raise ConfigurationError('sequences.id', 'duplicate sequence ids')
    expanded['sequences'] = sequences
    return expanded


def generate_sequence(entry, settings):
    """Render one manifest entry, drawing new trajectories while the
    translation filter rejects them.
    """
    height, width = settings['image_size']
    stride = entry.get('stride', settings['stride'])
    intrinsics = intrinsics_profile(entry['intrinsics'], height, width)
    length = entry['start'] + (entry['frames'] - 1) * stride + 1
    extent = 4.0 if entry['kind'] == 'indoor_wander' else 1.5 * length
    world = make_world(entry['world_seed'], entry['kind'], extent)
    for attempt in range(MAX_ATTEMPTS):
        seed = _derived_seed(entry['trajectory_seed'], attempt)
        trajectory = sample_trajectory(entry['kind'], length, seed)
        try:
            sample = make_sequence(
                world, trajectory, entry['frames'], stride, entry['start'],
                intrinsics, height, width, settings['channels'],
                settings['fps'])
        except SampleRejected as exc:
            logger.warning("Sequence {}: {}".format(entry['id'], exc))
            continue
        sample.sequence_id = entry['id']
        return sample, attempt
    raise SampleRejected(-1, float('nan'), MAX_TRANSLATION)


def write_sequence(sample, directory):
    if not os.path.isdir(directory):
        os.makedirs(directory)
    ext = '.pgm' if sample.frames.shape[-1] == 1 else '.ppm'
    for timestamp, frame in zip(sample.timestamps, sample.frames):
        write_raster(os.path.join(directory, '{:.6f}{}'.format(
            timestamp, ext)), frame)
    write_tum_trajectory(sample.trajectory.reanchored(),
                         os.path.join(directory, GROUNDTRUTH))


def _generate_and_write(entry, settings, out_dir):
    sample, attempt = generate_sequence(entry, settings)
    write_sequence(sample, os.path.join(out_dir, entry['id']))
    return entry['id'], attempt


def generate_dataset(manifest, out_dir, workers=1):
    """Render every manifest sequence into ``out_dir``.

    Generation is pure per seed, so ``workers > 1`` fans out over a
    process pool without changing the output.
    """
    expanded = expand_manifest(manifest)
    settings = {key: expanded[key] for key in DATASET_DEFAULTS}
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    entries = expanded['sequences']
    total = len(entries)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_generate_and_write, entry, settings,
                                   out_dir) for entry in entries]
            results = []
            for done, future in enumerate(futures, start=1):
                results.append(future.result())
                logger.info("Generated {}/{}: {}".format(
                    done, total, results[-1][0]))
    else:
        results = []
        for done, entry in enumerate(entries, start=1):
            results.append(_generate_and_write(entry, settings, out_dir))
            logger.info("Generated {}/{}: {}".format(done, total, entry['id']))
    for entry in entries:
        height, width = settings['image_size']
        entry['intrinsics_values'] = list(
            intrinsics_profile(entry['intrinsics'], height, width))
    with open(os.path.join(out_dir, MANIFEST), 'w') as fb:
        json.dump(expanded, fb, indent=2, sort_keys=True)
    return [sequence_id for sequence_id, _ in results]


def load_sequence(directory, size=None, sequence_id=None):
    frames, timestamps = load_image_sequence(directory, size)
    trajectory = load_tum_trajectory(os.path.join(directory, GROUNDTRUTH))
    if len(frames) != len(trajectory):
        raise LengthMismatch(len(trajectory), len(frames))
    return SequenceSample(frames, relative_poses(trajectory),
                          trajectory.poses, timestamps,
                          sequence_id=sequence_id)


def load_dataset(data_dir, size=None):
    """Rebuild the samples of a generated dataset directory."""
    path = os.path.join(data_dir, MANIFEST)
    if not os.path.exists(path):
        raise MissingFileError(path)
    with open(path, 'r') as fb:
        manifest = json.load(fb)
    samples = []
    for entry in manifest['sequences']:
        sample = load_sequence(os.path.join(data_dir, entry['id']), size,
                               entry['id'])
        if 'intrinsics_values' in entry:
            sample.intrinsics = Intrinsics(*entry['intrinsics_values'])
        samples.append(sample)
    return samples


__all__ = (
    'DATASET_DEFAULTS',
    'GROUNDTRUTH',
    'INTRINSICS_PROFILES',
    'Intrinsics',
    'MANIFEST',
    'MAX_TRANSLATION',
    'SequenceSample',
    'TRAJECTORY_KINDS',
    'World',
    'expand_manifest',
    'generate_dataset',
    'generate_sequence',
    'intrinsics_profile',
    'load_dataset',
    'load_sequence',
    'load_tum_trajectory',
    'make_sequence',
    'make_world',
    'read_tum_rows',
    'render',
    'sample_trajectory',
    'truncate_at_invalid',
    'write_sequence',
    'write_tum_trajectory',
)
