# Copyright (C) 2026 trajdiff developers

# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions are met:

#     1. Redistributions of source code must retain the above copyright
#       notice, this list of conditions and the following disclaimer.

#     2. Redistributions in binary form must reproduce the above
#       copyright notice, this list of conditions and the following
#       disclaimer in the documentation and/or other materials provided
#       with the distribution.

#     3. The names of the trajdiff developers may not be used to
#       endorse or promote products derived from this software without
#       specific prior written permission.

# THIS SOFTWARE IS PROVIDED BY THE TRAJDIFF DEVELOPERS ``AS IS'' AND ANY
# EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT LIMITED TO, THE IMPLIED
# WARRANTIES OF MERCHANTABILITY AND FITNESS FOR A PARTICULAR PURPOSE ARE
# DISCLAIMED. IN NO EVENT SHALL THE TRAJDIFF DEVELOPERS BE LIABLE FOR ANY
# DIRECT, INDIRECT, INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES
# (INCLUDING, BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR
# SERVICES; LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT
# LIABILITY, OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY
# OUT OF THE USE OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF
# SUCH DAMAGE.

"""
Dense tensors with reverse-mode automatic differentiation.

`Tensor` wraps a C-contiguous numpy array.  Every operation in this module
returns a new `Tensor`; when gradient recording is enabled and an operand
requires gradients, the result remembers its parents and a backward
closure.  `Tensor.backward` walks the recorded `Graph` in reverse
topological order and accumulates gradients additively into the leaves.

All operations broadcast over leading dimensions the way numpy does, so a
single set of learned queries of shape ``(N, C)`` may attend to a batch of
token sequences of shape ``(B, L, C)``.

Precision defaults to float64.  Training may switch to float32 with
`set_default_dtype` or the `default_dtype` context manager; gradient
checks should always run in float64.
"""

import contextlib
import math

import numpy as np

from .errors import ShapeError, TrajDiffError

__all__ = [
    'Tensor', 'Graph', 'tensor', 'as_tensor',
    'get_default_dtype', 'set_default_dtype', 'default_dtype',
    'no_grad', 'is_grad_enabled',
    'add', 'sub', 'mul', 'div', 'neg', 'power', 'matmul',
    'exp', 'log', 'sqrt', 'tanh', 'sigmoid', 'relu', 'silu', 'gelu', 'clip',
    'sum', 'mean', 'reshape', 'swapaxes', 'concat', 'index',
    'softmax', 'layer_norm', 'attention', 'conv2d', 'upsample2x',
    'grad_check',
]

LAYER_NORM_EPS = 1e-5

_state = {'dtype': np.float64, 'grad': True}


def get_default_dtype():
    return _state['dtype']


def set_default_dtype(dtype):
    """Set the floating point type used for newly created tensors."""
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64, got %r" % dtype)
    _state['dtype'] = dtype


@contextlib.contextmanager
def default_dtype(dtype):
    previous = _state['dtype']
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _state['dtype'] = previous


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    previous = _state['grad']
    _state['grad'] = False
    try:
        yield
    finally:
        _state['grad'] = previous


def is_grad_enabled():
    return _state['grad']


class Tensor:
    """
    An immutable dense array that can take part in gradient computation.

    **Parameters:**

    - *data*: Anything `numpy.asarray` accepts.  It is converted to the
      default floating point type.

    - *requires_grad*: When true the tensor is a leaf of the graph and
      receives a `grad` array after `backward`.
    """

    __slots__ = ('data', 'requires_grad', 'grad', '_parents', '_backward',
                 'op', '__weakref__')

    # make ndarray <op> Tensor dispatch to the Tensor reflected operators
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data)
        if arr.dtype != _state['dtype']:
            arr = arr.astype(_state['dtype'])
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self.op = 'leaf'

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
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ShapeError('item', self.shape, detail='expected one element')
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        grad = ', requires_grad=True' if self.requires_grad else ''
        return 'Tensor(%s%s)' % (np.array2string(self.data, precision=4), grad)

    def __len__(self):
        return len(self.data)

    def backward(self, grad=None):
        """
        Accumulate d(self)/d(leaf) into the `grad` of every leaf that
        requires gradients.

        *grad* defaults to ones and may only be omitted for single-element
        tensors.
        """
        if not self.requires_grad:
            return
        if grad is None:
            if self.data.size != 1:
                raise ShapeError('backward', self.shape,
                                 detail='grad must be given for non-scalar output')
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)
            if grad.shape != self.shape:
                raise ShapeError('backward', self.shape, grad.shape)
        Graph(self).backward(grad)

    # operators

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return index(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, axis1, axis2):
        return swapaxes(self, axis1, axis2)

    @property
    def T(self):
        return swapaxes(self, -1, -2)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


class Graph:
    """
    The recorded operations reachable from *root*.

    `order` lists every node that requires gradients, parents before
    children.  `backward` visits each node exactly once, in reverse.
    """

    def __init__(self, root):
        self.root = root
        self.order = self._toposort(root)

    @staticmethod
    def _toposort(root):
        order = []
        seen = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def __len__(self):
        return len(self.order)

    def backward(self, grad):
        grads = {id(self.root): grad}
        for node in reversed(self.order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if not g.flags.writeable:
                    g = g.copy()
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = np.asarray(pg, dtype=parent.data.dtype)
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward, op):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    track = _state['grad'] and any(p.requires_grad for p in parents)
    out.requires_grad = track
    out._parents = tuple(parents) if track else ()
    out._backward = backward if track else None
    out.op = op
    return out


def _unbroadcast(g, shape):
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape, detail='not broadcastable')


# elementwise arithmetic

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('add', a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), backward, 'add')


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('sub', a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), backward, 'sub')


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('mul', a, b)

    def backward(g):
        return (_unbroadcast(g * b.data, a.shape),
                _unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward, 'mul')


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('div', a, b)

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _result(a.data / b.data, (a, b), backward, 'div')


def neg(a):
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), 'neg')


def power(a, exponent):
    """*a* raised to a constant scalar *exponent*."""
    a = as_tensor(a)
    exponent = float(exponent)

    def backward(g):
        return (g * exponent * a.data ** (exponent - 1.0),)

    return _result(a.data ** exponent, (a,), backward, 'pow')


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), 'exp')


def log(a):
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,), 'log')


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _result(out, (a,), lambda g: (g * 0.5 / out,), 'sqrt')


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), 'tanh')


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a):
    a = as_tensor(a)
    out = _logistic(a.data)
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), 'sigmoid')


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return _result(np.where(mask, a.data, 0.0).astype(a.dtype), (a,),
                   lambda g: (g * mask,), 'relu')


def silu(a):
    a = as_tensor(a)
    s = _logistic(a.data)

    def backward(g):
        return (g * (s + a.data * s * (1.0 - s)),)

    return _result(a.data * s, (a,), backward, 'silu')


_GELU_K = math.sqrt(2.0 / math.pi)


def gelu(a):
    """Gaussian error linear unit, tanh approximation."""
    a = as_tensor(a)
    x = a.data
    th = np.tanh(_GELU_K * (x + 0.044715 * x ** 3))

    def backward(g):
        dth = (1.0 - th * th) * _GELU_K * (1.0 + 3.0 * 0.044715 * x * x)
        return (g * (0.5 * (1.0 + th) + 0.5 * x * dth),)

    return _result(0.5 * x * (1.0 + th), (a,), backward, 'gelu')


def clip(a, lo, hi):
    """Clamp to ``[lo, hi]``; the gradient is zero where clamping is active."""
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _result(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,),
                   'clip')


# reductions and shape manipulation

def sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return _result(np.asarray(out, dtype=a.dtype), (a,), backward, 'sum')


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[i] for i in axes]))
    return sum(a, axis, keepdims) * (1.0 / count)


def reshape(a, shape):
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError('reshape', a.shape, tuple(shape))
    return _result(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def swapaxes(a, axis1, axis2):
    a = as_tensor(a)
    out = np.ascontiguousarray(np.swapaxes(a.data, axis1, axis2))
    return _result(out, (a,), lambda g: (np.swapaxes(g, axis1, axis2),),
                   'swapaxes')


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError('concat', *[t.shape for t in tensors])
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return np.split(g, splits, axis=axis)

    return _result(out, tensors, backward, 'concat')


def index(a, idx):
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _result(np.ascontiguousarray(a.data[idx]), (a,), backward, 'index')


# linear algebra and neural network primitives

def matmul(a, b):
    """
    Matrix product over the last two axes, broadcasting leading axes.

    Raises `ShapeError` with both shapes when the inner dimensions
    disagree.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError('matmul', a.shape, b.shape,
                         detail='operands must be at least 2-d')
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError('matmul', a.shape, b.shape,
                         detail='inner dimensions %d != %d'
                         % (a.shape[-1], b.shape[-2]))
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError('matmul', a.shape, b.shape,
                         detail='batch dimensions not broadcastable')

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(out, (a, b), backward, 'matmul')


def softmax(a, axis=-1):
    """Softmax along *axis*, stabilized by subtracting the maximum."""
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _result(out, (a,), backward, 'softmax')


def layer_norm(a, eps=LAYER_NORM_EPS):
    """Normalize the last axis to zero mean and unit variance (no affine)."""
    a = as_tensor(a)
    centered = a.data - np.mean(a.data, axis=-1, keepdims=True)
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    out = centered * inv

    def backward(g):
        gm = np.mean(g, axis=-1, keepdims=True)
        gym = np.mean(g * out, axis=-1, keepdims=True)
        return (inv * (g - gm - out * gym),)

    return _result(out, (a,), backward, 'layer_norm')


def attention(q, k, v, return_weights=False):
    """
    Scaled dot-product attention ``softmax(q kᵀ / √d) v``.

    *q* is ``(..., Lq, d)``, *k* is ``(..., Lk, d)`` and *v* is
    ``(..., Lk, dv)``.  With *return_weights* the row-stochastic weight
    tensor ``(..., Lq, Lk)`` is returned as well.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError('attention', q.shape, k.shape,
                         detail='query and key widths differ')
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError('attention', k.shape, v.shape,
                         detail='key and value token counts differ')
    scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(q.shape[-1]))
    weights = softmax(scores, axis=-1)
    out = matmul(weights, v)
    if return_weights:
        return out, weights
    return out


def conv2d(x, w, b=None):
    """
    Same-padded 2-d convolution over channels-last input.

    *x* is ``(..., H, W, Cin)``; *w* is ``(kh, kw, Cin, Cout)`` with odd
    kernel sizes; *b* is ``(Cout,)``.
    """
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 4 or x.ndim < 3 or x.shape[-1] != w.shape[2]:
        raise ShapeError('conv2d', x.shape, w.shape,
                         detail='expected (..., H, W, Cin) and (kh, kw, Cin, Cout)')
    kh, kw, cin, cout = w.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError('conv2d', w.shape, detail='kernel sizes must be odd')
    height, width = x.shape[-3], x.shape[-2]
    ph, pw = kh // 2, kw // 2
    pad = [(0, 0)] * (x.ndim - 3) + [(ph, ph), (pw, pw), (0, 0)]
    padded = np.pad(x.data, pad)
    # (..., H, W, Cin, kh, kw)
    windows = np.lib.stride_tricks.sliding_window_view(
        padded, (kh, kw), axis=(-3, -2))
    lead = x.shape[:-3] + (height, width)
    patches = windows.reshape(lead + (cin * kh * kw,))
    kernel = np.transpose(w.data, (2, 0, 1, 3)).reshape(cin * kh * kw, cout)
    out = np.matmul(patches, kernel)

    def backward(g):
        flat_g = g.reshape(-1, cout)
        gk = np.matmul(patches.reshape(-1, cin * kh * kw).T, flat_g)
        gw = np.transpose(gk.reshape(cin, kh, kw, cout), (1, 2, 0, 3))
        gpatch = np.matmul(g, kernel.T).reshape(lead + (cin, kh, kw))
        gpad = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                gpad[..., i:i + height, j:j + width, :] += gpatch[..., i, j]
        gx = gpad[..., ph:ph + height, pw:pw + width, :]
        return np.ascontiguousarray(gx), gw

    out = _result(out, (x, w), backward, 'conv2d')
    if b is not None:
        out = add(out, b)
    return out


def upsample2x(x):
    """Nearest-neighbour 2x upsampling of ``(..., H, W, C)``."""
    x = as_tensor(x)
    if x.ndim < 3:
        raise ShapeError('upsample2x', x.shape, detail='expected (..., H, W, C)')
    out = np.repeat(np.repeat(x.data, 2, axis=-3), 2, axis=-2)
    height, width, channels = x.shape[-3:]

    def backward(g):
        g = g.reshape(x.shape[:-3] + (height, 2, width, 2, channels))
        return (g.sum(axis=(-4, -2)),)

    return _result(out, (x,), backward, 'upsample2x')


# verification

def _scalar_value(out):
    value = out.item() if isinstance(out, Tensor) else float(out)
    if not math.isfinite(value):
        raise TrajDiffError('grad_check: objective is not finite (%r)' % value)
    return value


def grad_check(f, theta, eps=1e-6, indices=None, floor=1e-3):
    """
    Compare the autodiff gradient of a scalar function with central
    differences.

    **Parameters:**

    - *f*: Callable taking *theta* and returning a single-element
      `Tensor`.  It may ignore its argument and close over *theta*
      instead, which is how model parameters are checked.

    - *theta*: The `Tensor` to differentiate with respect to.  Its data
      is temporarily replaced by perturbed copies and restored on exit.

    - *eps*: Central difference step, in ``[1e-6, 1e-3]``.

    - *indices*: Coordinates to check, as flat integers or index tuples.
      Defaults to every coordinate.

    - *floor*: Lower bound on the denominator of the relative error, so
      that coordinates with a vanishing gradient are compared absolutely.

    **Returns:** The maximum relative error
    ``|g_auto - g_fd| / max(|g_auto|, |g_fd|, floor)``.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError('eps must lie in [1e-6, 1e-3], got %r' % eps)
    original = theta.data
    saved = theta.requires_grad, theta.grad
    theta.requires_grad = True
    theta.grad = None
    try:
        out = f(theta)
        _scalar_value(out)
        if isinstance(out, Tensor):
            out.backward()
        analytic = theta.grad if theta.grad is not None else np.zeros_like(original)
        if indices is None:
            indices = list(np.ndindex(original.shape))
        worst = 0.0
        with no_grad():
            for idx in indices:
                if not isinstance(idx, tuple):
                    idx = np.unravel_index(int(idx), original.shape)
                plus = original.copy()
                plus[idx] += eps
                theta.data = plus
                f_plus = _scalar_value(f(theta))
                minus = original.copy()
                minus[idx] -= eps
                theta.data = minus
                f_minus = _scalar_value(f(theta))
                numeric = (f_plus - f_minus) / (2.0 * eps)
                auto = float(analytic[idx])
                denom = max(abs(auto), abs(numeric), floor)
                worst = max(worst, abs(auto - numeric) / denom)
    finally:
        theta.data = original
        theta.requires_grad, theta.grad = saved
    return worst
