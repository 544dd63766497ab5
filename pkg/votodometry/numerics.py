# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
"""\
A small dense tensor with reverse-mode differentiation.

Values live in 64-bit numpy arrays. Primitive operations record
themselves onto the active :class:`Tape` whenever one of their inputs
is tracked (a leaf with ``requires_grad`` or the output of a recorded
operation). Without an active tape every primitive is plain forward math.

Usage::

    with Tape() as tape:
        loss = mean(gelu(linear(x, w, b)))
    tape.backward(loss)
    w.grad  # populated

Only bias-add broadcasts implicitly. Every other shape disagreement
raises :class:`votodometry.exceptions.ShapeError`.

"""
import contextlib
import math
import threading

import numpy as np

from .exceptions import NotScalarError, ShapeError


DTYPE = np.float64
LAYER_NORM_EPS = 1e-9
GELU_COEFF = math.sqrt(2.0 / math.pi)
SVD_MAX_SWEEPS = 100
SVD_TOLERANCE = 1e-15
SVD_RANK_CUT = 1e-14
GRADCHECK_FLOOR = 1e-6

_state = threading.local()


class Tensor(object):
    """Dense real array that may take part in differentiation."""

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad = None
        self.node = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def tracked(self):
        return self.requires_grad or self.node is not None

    def item(self):
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        label = " name={!r}".format(self.name) if self.name else ''
        return "<Tensor shape={}{}>".format(self.shape, label)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)


def parameter(data, name=None):
    """A leaf tensor that receives gradients."""
    return Tensor(np.array(data, dtype=DTYPE), requires_grad=True, name=name)


def constant(data):
    """A leaf tensor that never receives gradients."""
    if isinstance(data, Tensor):
        return data
    return Tensor(data)


class TapeNode(object):
    __slots__ = ('tape', 'index', 'output', 'inputs', 'backward', 'op')

    def __init__(self, tape, index, output, inputs, backward, op):
        self.tape = tape
        self.index = index
        self.output = output
        self.inputs = inputs
        self.backward = backward
        self.op = op


class Tape(object):
    """Ordered record of primitive applications.

    Nodes are appended as operations run, so every node's inputs precede
    it. A tape belongs to the thread that entered it.
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc_info):
        _stack().pop()

    def __len__(self):
        return len(self.nodes)

    def append(self, output, inputs, backward, op=None):
        node = TapeNode(self, len(self.nodes), output, inputs, backward, op)
        output.node = node
        self.nodes.append(node)
        return node

    def backward(self, loss):
        """Populate ``grad`` on every leaf reachable from ``loss``."""
        if loss.size != 1:
            raise NotScalarError(loss.shape)
        seed = np.ones_like(loss.data)
        if loss.node is None:
            if loss.requires_grad:
                _accumulate_leaf(loss, seed)
            return
        grads = {id(loss): seed}
        for node in reversed(self.nodes[:loss.node.index + 1]):
            grad = grads.pop(id(node.output), None)
            if grad is None:
                continue
            input_grads = node.backward(grad)
            for tensor, tensor_grad in zip(node.inputs, input_grads):
                if tensor_grad is None or not tensor.tracked:
                    continue
                if tensor.node is not None:
                    key = id(tensor)
                    if key in grads:
                        grads[key] = grads[key] + tensor_grad
                    else:
                        grads[key] = tensor_grad
                else:
                    _accumulate_leaf(tensor, tensor_grad)


def _stack():
    stack = getattr(_state, 'tapes', None)
    if stack is None:
        stack = _state.tapes = []
    return stack


def _accumulate_leaf(tensor, grad):
    grad = np.asarray(grad, dtype=DTYPE).reshape(tensor.shape)
    if tensor.grad is None:
        tensor.grad = grad.copy()
    else:
        tensor.grad = tensor.grad + grad


def active_tape():
    stack = _stack()
    return stack[-1] if stack else None


@contextlib.contextmanager
def no_tape():
    """Run the enclosed block as plain forward math."""
    stack = _stack()
    saved = stack[:]
    del stack[:]
    try:
        yield
    finally:
        stack[:] = saved


def record(data, inputs, backward, op=None):
    """Wrap ``data`` as the output of a primitive over ``inputs``.

    ``backward`` receives the gradient of the output and returns one
    gradient (or ``None``) per input, in order. Custom primitives outside
    this module are built with this function.
    """
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.tracked for t in inputs):
        tape.append(out, tuple(inputs), backward, op)
    return out


def backward(loss):
    """Run reverse-mode differentiation from the scalar ``loss``."""
    if loss.size != 1:
        raise NotScalarError(loss.shape)
    if loss.node is None:
        if loss.requires_grad:
            _accumulate_leaf(loss, np.ones_like(loss.data))
        return
    loss.node.tape.backward(loss)


# ############### #
#   Primitives    #
# ############### #

def _is_bias(a, b):
    return b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]


def _sum_to_bias(grad, width):
    return grad.reshape(-1, width).sum(axis=0)


def add(a, b):
    """Elementwise sum. ``b`` may be a bias over the last axis of ``a``."""
    a, b = constant(a), constant(b)
    if a.shape == b.shape:
        return record(a.data + b.data, (a, b), lambda g: (g, g), 'add')
    if _is_bias(a, b):
        width = b.shape[0]
        return record(a.data + b.data, (a, b),
                      lambda g: (g, _sum_to_bias(g, width)), 'add')
    raise ShapeError('add', a.shape, b.shape)


def sub(a, b):
    a, b = constant(a), constant(b)
    if a.shape != b.shape:
        raise ShapeError('sub', a.shape, b.shape)
    return record(a.data - b.data, (a, b), lambda g: (g, -g), 'sub')


def mul(a, b):
    a, b = constant(a), constant(b)
    if a.shape != b.shape:
        raise ShapeError('mul', a.shape, b.shape)
    a_data, b_data = a.data, b.data
    return record(a_data * b_data, (a, b),
                  lambda g: (g * b_data, g * a_data), 'mul')


def scale(x, factor):
    factor = float(factor)
    return record(x.data * factor, (x,), lambda g: (g * factor,), 'scale')


def absolute(x):
    sign = np.sign(x.data)
    return record(np.abs(x.data), (x,), lambda g: (g * sign,), 'abs')


def total(x):
    """Sum of every entry, as a scalar tensor."""
    shape = x.shape
    return record(np.asarray(x.data.sum()), (x,),
                  lambda g: (np.broadcast_to(g, shape).copy(),), 'sum')


def mean(x):
    count = float(x.size)
    shape = x.shape
    return record(np.asarray(x.data.mean()), (x,),
                  lambda g: (np.full(shape, float(g) / count),), 'mean')


def matmul(a, b):
    """Matrix product over the last two axes; leading axes must agree."""
    if (a.ndim < 2 or b.ndim < 2 or a.shape[:-2] != b.shape[:-2] or
            a.shape[-1] != b.shape[-2]):
        raise ShapeError('matmul', a.shape, b.shape)
    a_data, b_data = a.data, b.data

    def grad_fn(g):
        return (np.matmul(g, np.swapaxes(b_data, -1, -2)),
                np.matmul(np.swapaxes(a_data, -1, -2), g))

    return record(np.matmul(a_data, b_data), (a, b), grad_fn, 'matmul')


def linear(x, weight, bias=None):
    """``x @ weight + bias`` with ``weight`` shared across leading axes."""
    if x.ndim < 1 or weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError('linear', x.shape, weight.shape)
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeError('linear', weight.shape, bias.shape)
    d_in, d_out = weight.shape
    x_data, w_data = x.data, weight.data
    out = np.matmul(x_data, w_data)
    if bias is not None:
        out = out + bias.data

    def grad_fn(g):
        flat_g = g.reshape(-1, d_out)
        grads = [np.matmul(g, w_data.T),
                 np.matmul(x_data.reshape(-1, d_in).T, flat_g)]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return tuple(grads)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record(out, inputs, grad_fn, 'linear')


def swapaxes(x, axis1, axis2):
    return record(np.swapaxes(x.data, axis1, axis2), (x,),
                  lambda g: (np.swapaxes(g, axis1, axis2),), 'swapaxes')


def reshape(x, shape):
    shape = tuple(shape)
    original = x.shape
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ShapeError('reshape', original, shape)
    return record(data, (x,), lambda g: (g.reshape(original),), 'reshape')


def broadcast_to(x, shape):
    """Explicitly repeat ``x`` over new leading axes or unit axes."""
    shape = tuple(shape)
    original = x.shape
    try:
        data = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise ShapeError('broadcast_to', original, shape)
    lead = len(shape) - len(original)

    def grad_fn(g):
        g = g.sum(axis=tuple(range(lead))) if lead else g
        axes = tuple(i for i, n in enumerate(original)
                     if n == 1 and g.shape[i] != 1)
        if axes:
            g = g.sum(axis=axes, keepdims=True)
        return (g,)

    return record(data, (x,), grad_fn, 'broadcast_to')


def concat(tensors, axis):
    tensors = [constant(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError('concat', tensors[0].shape, tensors[-1].shape)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record(data, tensors, grad_fn, 'concat')


def index(x, key):
    """Basic (slice/integer) indexing."""
    shape = x.shape

    def grad_fn(g):
        full = np.zeros(shape, dtype=DTYPE)
        full[key] += g
        return (full,)

    return record(np.array(x.data[key]), (x,), grad_fn, 'index')


def softmax_lastdim(x):
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=-1, keepdims=True)

    def grad_fn(g):
        inner = (g * probs).sum(axis=-1, keepdims=True)
        return (probs * (g - inner),)

    return record(probs, (x,), grad_fn, 'softmax')


def layer_norm(x, gain, bias, eps=LAYER_NORM_EPS):
    """Normalize the last axis to zero mean and unit variance, then
    apply ``gain`` and ``bias`` (both of the last axis' width).
    """
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError('layer_norm', x.shape, gain.shape)
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) +
                            eps)
    normed = centered * inv_std
    gain_data = gain.data

    def grad_fn(g):
        g_normed = g * gain_data
        g_x = inv_std * (g_normed -
                         g_normed.mean(axis=-1, keepdims=True) -
                         normed * (g_normed * normed).mean(axis=-1,
                                                           keepdims=True))
        return (g_x,
                _sum_to_bias(g * normed, width),
                _sum_to_bias(g, width))

    return record(normed * gain_data + bias.data, (x, gain, bias), grad_fn,
                  'layer_norm')


def gelu(x):
    """GELU, tanh approximation."""
    data = x.data
    inner = GELU_COEFF * (data + 0.044715 * data ** 3)
    tanh = np.tanh(inner)

    def grad_fn(g):
        d_inner = GELU_COEFF * (1.0 + 3 * 0.044715 * data ** 2)
        return (g * (0.5 * (1.0 + tanh) +
                     0.5 * data * (1.0 - tanh ** 2) * d_inner),)

    return record(0.5 * data * (1.0 + tanh), (x,), grad_fn, 'gelu')


def scaled_dot_attention(query, key, value, return_weights=False):
    """``softmax(Q Kᵀ / √d_h) V`` over the last two axes.

    Query and key share the last (head) width; key and value share the
    sequence axis and every leading axis.
    """
    if (query.shape[-1] != key.shape[-1] or
            query.shape[:-2] != key.shape[:-2]):
        raise ShapeError('scaled_dot_attention', query.shape, key.shape)
    if key.shape[:-1] != value.shape[:-1]:
        raise ShapeError('scaled_dot_attention', key.shape, value.shape)
    head_dim = query.shape[-1]
    scores = scale(matmul(query, swapaxes(key, -1, -2)),
                   1.0 / math.sqrt(head_dim))
    weights = softmax_lastdim(scores)
    out = matmul(weights, value)
    if return_weights:
        return out, weights
    return out


def multi_head_attention(x, w_query, w_key, w_value, w_out, heads,
                         qk_input=None, return_weights=False):
    """Multi-head self-attention over the second-to-last axis of ``x``.

    Each ``w_*`` holds every head side by side (``d x heads·d_h``); head
    ``i`` uses columns ``i·d_h:(i+1)·d_h``. Queries and keys are taken from
    ``qk_input`` when given, values always from ``x``. Returned weights have
    shape ``(..., heads, n, n)``.
    """
    qk_input = x if qk_input is None else qk_input
    if qk_input.shape != x.shape:
        raise ShapeError('multi_head_attention', qk_input.shape, x.shape)
    width = w_query.shape[1]
    if width % heads:
        raise ShapeError('multi_head_attention', w_query.shape, (heads,))
    head_dim = width // heads
    lead = x.shape[:-1]

    def split(t):
        t = reshape(t, lead + (heads, head_dim))
        return swapaxes(t, -2, -3)

    query = split(linear(qk_input, w_query))
    key = split(linear(qk_input, w_key))
    value = split(linear(x, w_value))
    out, weights = scaled_dot_attention(query, key, value,
                                        return_weights=True)
    out = reshape(swapaxes(out, -2, -3), lead + (width,))
    out = linear(out, w_out)
    if return_weights:
        return out, weights
    return out


# ############### #
#   Diagnostics   #
# ############### #

def gradient_check(fn, tensors, step=1e-5):
    """Compare tape gradients of ``fn()`` against central differences.

    ``fn`` takes no arguments and returns a scalar tensor built from
    ``tensors``. Returns the worst relative error over every entry.
    """
    for tensor in tensors:
        tensor.zero_grad()
    with Tape() as tape:
        loss = fn()
    tape.backward(loss)
    analytic = [np.zeros(t.shape) if t.grad is None else t.grad.copy()
                for t in tensors]

    worst = 0.0
    with no_tape():
        for tensor, grad in zip(tensors, analytic):
            flat = tensor.data.reshape(-1)
            flat_grad = grad.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + step
                upper = fn().item()
                flat[i] = original - step
                lower = fn().item()
                flat[i] = original
                numeric = (upper - lower) / (2.0 * step)
                denom = max(abs(flat_grad[i]), abs(numeric), GRADCHECK_FLOOR)
                worst = max(worst, abs(flat_grad[i] - numeric) / denom)
    return worst


# ############### #
#   Linear algebra
# ############### #

def _orthogonal_to(u):
    axis = np.zeros(3)
    axis[np.argmin(np.abs(u))] = 1.0
    w = np.cross(u, axis)
    return w / np.linalg.norm(w)


def _one_sided_jacobi(m):
    """Rotate the columns of ``m`` until they are mutually orthogonal.

    Returns ``(a, v)`` with ``a = m @ v`` and ``v`` orthogonal.
    """
    a = m.copy()
    v = np.eye(3)
    for _ in range(SVD_MAX_SWEEPS):
        rotated = False
        for p, q in ((0, 1), (0, 2), (1, 2)):
            alpha = a[:, p] @ a[:, p]
            beta = a[:, q] @ a[:, q]
            gamma = a[:, p] @ a[:, q]
            if abs(gamma) <= SVD_TOLERANCE * math.sqrt(alpha * beta):
                continue
            rotated = True
            zeta = (beta - alpha) / (2.0 * gamma)
            t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(zeta, 1))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = c * t
            for target in (a, v):
                column_p = target[:, p].copy()
                target[:, p] = c * column_p - s * target[:, q]
                target[:, q] = s * column_p + c * target[:, q]
        if not rotated:
            break
    return a, v


def svd3(m):
    """Singular value decomposition of a 3x3 matrix.

    Returns ``(U, sigma, V)`` with ``m = U @ diag(sigma) @ V.T``, sigma
    sorted descending and non-negative, U and V orthogonal. Works on
    ``m`` directly (one-sided Jacobi), so small singular values keep
    their accuracy. Not differentiable.
    """
    m = np.asarray(m, dtype=DTYPE)
    if m.shape != (3, 3):
        raise ShapeError('svd3', m.shape, (3, 3))
    a, v = _one_sided_jacobi(m)
    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(-sigma, kind='stable')
    sigma, a, v = sigma[order], a[:, order], v[:, order]

    # columns at rounding level carry no direction
    cut = SVD_RANK_CUT * sigma[0]
    u = np.zeros((3, 3))
    u[:, 0] = a[:, 0] / sigma[0] if sigma[0] > 0 else (1.0, 0.0, 0.0)
    if sigma[1] > cut:
        u1 = a[:, 1] / sigma[1]
        u1 = u1 - (u1 @ u[:, 0]) * u[:, 0]
        u[:, 1] = u1 / np.linalg.norm(u1)
    else:
        u[:, 1] = _orthogonal_to(u[:, 0])
    u[:, 2] = np.cross(u[:, 0], u[:, 1])
    if sigma[2] > cut and a[:, 2] @ u[:, 2] < 0:
        u[:, 2] = -u[:, 2]
    return u, sigma, v


__all__ = (
    'DTYPE',
    'Tape',
    'Tensor',
    'absolute',
    'active_tape',
    'add',
    'backward',
    'broadcast_to',
    'concat',
    'constant',
    'gelu',
    'gradient_check',
    'index',
    'layer_norm',
    'linear',
    'matmul',
    'mean',
    'mul',
    'multi_head_attention',
    'no_tape',
    'parameter',
    'record',
    'reshape',
    'scale',
    'scaled_dot_attention',
    'softmax_lastdim',
    'sub',
    'svd3',
    'swapaxes',
    'total',
)
