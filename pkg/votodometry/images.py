# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
PGM/PPM raster input and output.

Rasters are ``H x W x C`` float64 arrays with values in ``[0, 1]``;
``C`` is 1 for grayscale (PGM, P5) and 3 for color (PPM, P6).

"""
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import ImageFormatError, MissingFileError


EXTENSIONS = {'.pgm': 1, '.ppm': 3}


def read_raster(path):
    if not os.path.exists(path):
        raise MissingFileError(path)
    try:
        with Image.open(path) as image:
            image.load()
            mode = image.mode
            if mode in ('L', 'RGB'):
                data = np.asarray(image, dtype=np.float64) / 255.0
            elif mode in ('I', 'I;16', 'I;16B'):
                data = np.asarray(image, dtype=np.float64) / 65535.0
            else:
                raise ImageFormatError(path, 'unsupported mode ' + mode)
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(path, str(exc))
    if data.ndim == 2:
        data = data[..., None]
    return data


def to_bytes(raster):
    """Quantize a ``[0, 1]`` raster to 8 bits."""
    raster = np.clip(np.asarray(raster, dtype=np.float64), 0.0, 1.0)
    return np.round(raster * 255.0).astype(np.uint8)


def write_raster(path, raster):
    """Write a raster as 8-bit PGM (one channel) or PPM (three)."""
    raster = np.asarray(raster)
    if raster.ndim == 2:
        raster = raster[..., None]
    channels = raster.shape[-1]
    data = to_bytes(raster)
    if channels == 1:
        image = Image.fromarray(data[..., 0])
    elif channels == 3:
        image = Image.fromarray(data)
    else:
        raise ImageFormatError(path, '{} channels'.format(channels))
    image.save(path, format='PPM')


def resize_area(raster, height, width):
    """Area-average resize of an ``H x W x C`` raster."""
    raster = np.asarray(raster, dtype=np.float64)
    if raster.shape[:2] == (height, width):
        return raster
    channels = [
        np.asarray(Image.fromarray(raster[..., c].astype(np.float32))
                   .resize((width, height), resample=Image.Resampling.BOX),
                   dtype=np.float64)
        for c in range(raster.shape[-1])
    ]
    return np.stack(channels, axis=-1)


def list_rasters(directory):
    """``(timestamp, path)`` of every PGM/PPM in ``directory``, sorted by
    timestamp. File names must be ``<timestamp>.pgm`` or ``.ppm``.
    """
    if not os.path.isdir(directory):
        raise MissingFileError(directory)
    entries = []
    for name in os.listdir(directory):
        stem, ext = os.path.splitext(name)
        if ext.lower() not in EXTENSIONS:
            continue
        path = os.path.join(directory, name)
        try:
            timestamp = float(stem)
        except ValueError:
            raise ImageFormatError(path, 'file name is not a timestamp')
        entries.append((timestamp, path))
    entries.sort()
    return entries


def load_image_sequence(directory, size=None):
    """Frames ``(N, H, W, C)`` and timestamps of a raster directory,
    ordered by timestamp and resized by area averaging to ``size``
    (``(H, W)``) when given.
    """
    entries = list_rasters(directory)
    frames, timestamps, channels = [], [], None
    for timestamp, path in entries:
        raster = read_raster(path)
        if channels is None:
            channels = raster.shape[-1]
        elif raster.shape[-1] != channels:
            raise ImageFormatError(
                path, 'has {} channels, the sequence has {}'.format(
                    raster.shape[-1], channels))
        if size is not None:
            raster = resize_area(raster, *size)
        elif frames and raster.shape != frames[0].shape:
            raise ImageFormatError(
                path, 'size {} differs from {}'.format(
                    raster.shape[:2], frames[0].shape[:2]))
        frames.append(raster)
        timestamps.append(timestamp)
    if not frames:
        return np.zeros((0, 0, 0, 0)), np.zeros(0)
    return np.stack(frames), np.array(timestamps)


__all__ = (
    'EXTENSIONS',
    'list_rasters',
    'load_image_sequence',
    'read_raster',
    'resize_area',
    'to_bytes',
    'write_raster',
)
