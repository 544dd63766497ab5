# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###


class VotError(Exception):
    """Base class for every error this package raises on purpose.

    Each subclass carries an integer ``code`` (surfaced by the command
    line as ``ERROR(<code>):``) and a ``_message_template`` that is
    rendered from the fields returned by ``as_dict``.
    """
    code = 0
    _message_template = None

    def __init__(self, **fields):
        self._fields = fields
        super(VotError, self).__init__(self.message)

    def __repr__(self):
        return "{}: {}".format(self.__class__.__name__, self.as_dict())

    def __reduce__(self):
        # Subclass signatures differ from ``args``; rebuild from fields
        # so errors survive the trip back from worker processes.
        return (_restore, (self.__class__, self._fields,))

    def __str__(self):
        return self.message

    @property
    def message(self):
        if self._message_template is not None:
            msg = self._message_template.format(**self.as_dict())
        else:
            msg = repr(self)
        return msg

    def as_dict(self):
        """Render the exception to a dict"""
        data = {
            'code': self.code,
            'type': self.__class__.__name__,
        }
        data.update(self._fields)
        return data


def _restore(cls, fields):
    error = cls.__new__(cls)
    VotError.__init__(error, **fields)
    return error


# ###################### #
#   General Exceptions   #
# ###################### #

class ConfigurationError(VotError):
    """Raised when a run configuration is unknown, malformed or invalid."""
    code = 1
    _message_template = "Invalid configuration '{key}': {reason}"

    def __init__(self, key, reason):
        super(ConfigurationError, self).__init__(key=key, reason=reason)


class MissingFileError(VotError):
    """Raised when an input file or directory does not exist."""
    code = 2
    _message_template = "No such file or directory: {path}"

    def __init__(self, path):
        super(MissingFileError, self).__init__(path=str(path))


# ################################## #
#   Geometry & Numerics Exceptions   #
# ################################## #

class ShapeError(VotError):
    """Raised when two tensors are not conformable for an operation."""
    code = 3
    _message_template = "Shape mismatch in {operation}: {left} vs {right}"

    def __init__(self, operation, left, right):
        super(ShapeError, self).__init__(
            operation=operation, left=tuple(left), right=tuple(right))


class NotScalarError(VotError):
    """Raised when backward is requested from a non-scalar tensor."""
    code = 4
    _message_template = "Backward requires a scalar, got shape {shape}"

    def __init__(self, shape):
        super(NotScalarError, self).__init__(shape=tuple(shape))


class DegenerateInputError(VotError):
    """Raised when a 3x3 matrix is too rank deficient to project
    onto SO(3) without picking an arbitrary rotation.
    """
    code = 5
    _message_template = ("Degenerate input for {operation}: "
                         "singular values {singular_values}")

    def __init__(self, operation, singular_values):
        super(DegenerateInputError, self).__init__(
            operation=operation,
            singular_values=[float(x) for x in singular_values])


class PredictionError(VotError):
    """Raised when a pose cannot be produced for a given frame."""
    code = 6
    _message_template = "Pose prediction failed at frame {frame}: {reason}"

    def __init__(self, frame, reason):
        super(PredictionError, self).__init__(frame=frame, reason=reason)


# ################### #
#   Data Exceptions   #
# ################### #

class PatchSizeError(VotError):
    """Raised when an image cannot be cut into whole patches."""
    code = 7
    _message_template = ("Image of height {height} and width {width} "
                         "is not divisible by patch size {patch_size}")

    def __init__(self, height, width, patch_size):
        super(PatchSizeError, self).__init__(
            height=height, width=width, patch_size=patch_size)


class TrajectoryFormatError(VotError):
    """Raised when a trajectory text file has a malformed line."""
    code = 8
    _message_template = "Malformed trajectory line {line} in {path}: {reason}"

    def __init__(self, path, line, reason):
        super(TrajectoryFormatError, self).__init__(
            path=str(path), line=line, reason=reason)


class NonMonotonicTimestamps(VotError):
    """Raised when timestamps are not strictly increasing."""
    code = 9
    _message_template = ("Timestamps must be strictly increasing "
                         "({source}, index {index})")

    def __init__(self, source, index):
        super(NonMonotonicTimestamps, self).__init__(
            source=str(source), index=index)


class ImageFormatError(VotError):
    """Raised when a raster cannot be read or does not fit its sequence."""
    code = 10
    _message_template = "Bad image {path}: {reason}"

    def __init__(self, path, reason):
        super(ImageFormatError, self).__init__(path=str(path), reason=reason)


class SampleRejected(VotError):
    """Raised when a generated sample violates the dataset filter.
    The caller is expected to draw again.
    """
    code = 11
    _message_template = ("Sample rejected: step {index} translates "
                         "{magnitude:.3f} m (limit {limit} m)")

    def __init__(self, index, magnitude, limit):
        super(SampleRejected, self).__init__(
            index=index, magnitude=float(magnitude), limit=limit)


# ####################### #
#   Training Exceptions   #
# ####################### #

class NonFiniteGradient(VotError):
    """Raised when an optimizer step sees a NaN or infinite gradient."""
    code = 12
    _message_template = "Non-finite gradient for parameter '{name}'"

    def __init__(self, name):
        super(NonFiniteGradient, self).__init__(name=name)


class NonFiniteLoss(VotError):
    """Raised when the training loss stops being a finite number."""
    code = 13
    _message_template = "Non-finite loss at epoch {epoch}, batch {batch}"

    def __init__(self, epoch, batch):
        super(NonFiniteLoss, self).__init__(epoch=epoch, batch=batch)


class CheckpointError(VotError):
    """Raised when a checkpoint is unreadable or does not fit a model."""
    code = 14
    _message_template = "Checkpoint {path}: {reason}"

    def __init__(self, path, reason):
        super(CheckpointError, self).__init__(path=str(path), reason=reason)


# ######################### #
#   Evaluation Exceptions   #
# ######################### #

class LengthMismatch(VotError):
    """Raised when two trajectories do not have the same frame count."""
    code = 15
    _message_template = ("Trajectories differ in length: "
                         "{expected} vs {actual}")

    def __init__(self, expected, actual):
        super(LengthMismatch, self).__init__(expected=expected, actual=actual)


class EmptySegmentError(VotError):
    """Raised when a trajectory is shorter than a single segment."""
    code = 16
    _message_template = "No {segment} segment fits in {frames} frames"

    def __init__(self, segment, frames):
        super(EmptySegmentError, self).__init__(
            segment=segment, frames=frames)


class DegenerateAlignment(VotError):
    """Raised when the points to align are coincident or collinear."""
    code = 17
    _message_template = "Cannot align {mode}: {reason}"

    def __init__(self, mode, reason):
        super(DegenerateAlignment, self).__init__(mode=mode, reason=reason)


__all__ = (
    'CheckpointError',
    'ConfigurationError',
    'DegenerateAlignment',
    'DegenerateInputError',
    'EmptySegmentError',
    'ImageFormatError',
    'LengthMismatch',
    'MissingFileError',
    'NonFiniteGradient',
    'NonFiniteLoss',
    'NonMonotonicTimestamps',
    'NotScalarError',
    'PatchSizeError',
    'PredictionError',
    'SampleRejected',
    'ShapeError',
    'TrajectoryFormatError',
    'VotError',
)
