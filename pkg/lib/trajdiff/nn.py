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
Learnable building blocks on top of `trajdiff.tensorcore`.

Layers are plain objects holding `Parameter` leaves.  `Module` discovers
parameters by walking instance attributes in definition order, so
parameter names are stable and can be used as checkpoint keys.
"""

import collections
import math

import numpy as np

from . import tensorcore as tc
from .errors import ShapeError

__all__ = ['Parameter', 'Module', 'Linear', 'LayerNorm', 'MLP',
           'MultiHeadAttention', 'CrossAttentionLayer', 'Conv2d']


class Parameter(tc.Tensor):
    """A leaf tensor that always requires gradients."""

    __slots__ = ()

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


def _uniform(rng, shape, bound):
    return rng.uniform(-bound, bound, size=shape).astype(tc.get_default_dtype())


def _normal(rng, shape, std):
    return (rng.standard_normal(shape) * std).astype(tc.get_default_dtype())


def _zeros(shape):
    return np.zeros(shape, dtype=tc.get_default_dtype())


def _ones(shape):
    return np.ones(shape, dtype=tc.get_default_dtype())


class Module:

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix=''):
        for name, value in vars(self).items():
            full = prefix + name
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + '.')
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters('%s.%d.' % (full, i))

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def num_parameters(self):
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return collections.OrderedDict(
            (name, p.data) for name, p in self.named_parameters())

    def load_state_dict(self, state):
        """Replace parameter values; names and shapes must match exactly."""
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError('state mismatch: missing %s, unexpected %s'
                           % (missing, unexpected))
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError('load_state_dict[%s]' % name, p.shape, value.shape)
            p.data = np.array(value, dtype=p.dtype)


class Linear(Module):
    """``y = x W + b`` over the last axis; also serves as a 1x1 convolution."""

    def __init__(self, in_features, out_features, rng, bias=True, zero=False):
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / math.sqrt(in_features)
        shape = (in_features, out_features)
        self.weight = Parameter(_zeros(shape) if zero else _uniform(rng, shape, bound))
        self.bias = Parameter(_zeros((out_features,))) if bias else None

    def forward(self, x):
        x = tc.as_tensor(x)
        if x.shape[-1] != self.in_features:
            raise ShapeError('linear', x.shape, self.weight.shape,
                             detail='expected last axis %d' % self.in_features)
        y = tc.matmul(x, self.weight) if x.ndim >= 2 else \
            tc.reshape(tc.matmul(tc.reshape(x, (1, -1)), self.weight), (-1,))
        if self.bias is not None:
            y = y + self.bias
        return y


class LayerNorm(Module):

    def __init__(self, dim, affine=True):
        self.dim = dim
        if affine:
            self.weight = Parameter(_ones((dim,)))
            self.bias = Parameter(_zeros((dim,)))
        else:
            self.weight = self.bias = None

    def forward(self, x):
        y = tc.layer_norm(x)
        if self.weight is not None:
            y = y * self.weight + self.bias
        return y


_ACTIVATIONS = {'gelu': tc.gelu, 'relu': tc.relu, 'silu': tc.silu}


class MLP(Module):
    """Two linear layers with a pointwise activation in between."""

    def __init__(self, in_features, hidden, out_features, rng, activation='gelu',
                 zero_last=False):
        self.fc1 = Linear(in_features, hidden, rng)
        self.fc2 = Linear(hidden, out_features, rng, zero=zero_last)
        self.activation = activation

    def forward(self, x):
        return self.fc2(_ACTIVATIONS[self.activation](self.fc1(x)))


class MultiHeadAttention(Module):
    """
    Multi-head scaled dot-product attention with input and output
    projections.  Queries and key/value tokens may carry different leading
    dimensions as long as they broadcast.
    """

    def __init__(self, dim, heads, rng):
        if dim % heads:
            raise ShapeError('attention heads', (dim,), (heads,),
                             detail='width must be divisible by heads')
        self.dim = dim
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.o = Linear(dim, dim, rng)

    def _split(self, x):
        x = tc.reshape(x, x.shape[:-1] + (self.heads, self.dim // self.heads))
        return tc.swapaxes(x, -2, -3)

    def forward(self, x, tokens=None, return_weights=False):
        tokens = x if tokens is None else tokens
        x, tokens = tc.as_tensor(x), tc.as_tensor(tokens)
        if x.shape[-1] != self.dim or tokens.shape[-1] != self.dim:
            raise ShapeError('multi-head attention', x.shape, tokens.shape,
                             detail='width must be %d' % self.dim)
        out, weights = tc.attention(self._split(self.q(x)),
                                    self._split(self.k(tokens)),
                                    self._split(self.v(tokens)),
                                    return_weights=True)
        out = tc.swapaxes(out, -2, -3)
        out = self.o(tc.reshape(out, out.shape[:-2] + (self.dim,)))
        if return_weights:
            return out, weights
        return out


class CrossAttentionLayer(Module):
    """
    Pre-norm transformer layer in which *x* attends to *tokens*::

        x = x + Attn(LN(x), LN(tokens))
        x = x + MLP(LN(x))
    """

    def __init__(self, dim, heads, rng, mlp_ratio=4):
        self.norm_q = LayerNorm(dim)
        self.norm_kv = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm_mlp = LayerNorm(dim)
        self.mlp = MLP(dim, dim * mlp_ratio, dim, rng)

    def forward(self, x, tokens):
        x = x + self.attn(self.norm_q(x), self.norm_kv(tokens))
        return x + self.mlp(self.norm_mlp(x))


class Conv2d(Module):
    """Same-padded convolution over channels-last grids."""

    def __init__(self, in_channels, out_channels, kernel_size, rng, zero=False):
        shape = (kernel_size, kernel_size, in_channels, out_channels)
        bound = 1.0 / math.sqrt(in_channels * kernel_size * kernel_size)
        self.weight = Parameter(_zeros(shape) if zero else _uniform(rng, shape, bound))
        self.bias = Parameter(_zeros((out_channels,)))

    def forward(self, x):
        return tc.conv2d(x, self.weight, self.bias)


def normal_parameter(rng, shape, std=0.02):
    return Parameter(_normal(rng, shape, std))


def uniform_parameter(rng, shape, bound):
    return Parameter(_uniform(rng, shape, bound))
