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
Trajectory-oriented BEV encoder.

A set of learned heatmap queries, one per cell of the 4x down-sampled
grid, attends to the BEV feature tokens together with the embedded ego
status.  A small up-sampling convolutional decoder turns the refined
queries into a one-channel heatmap of where the ego is likely to drive,
and a 1x1 convolution fuses that heatmap back into the BEV features.
"""

import dataclasses
import logging

import numpy as np

from . import nn
from . import tensorcore as tc
from .errors import GridError, ShapeError
from .heatmap import GridMeta

__all__ = ['COMMANDS', 'EgoStatus', 'BevGrid', 'EncoderOutput',
           'TrajectoryBevEncoder']

log = logging.getLogger(__name__)

COMMANDS = ('left', 'straight', 'right')

EGO_FEATURES = 7


@dataclasses.dataclass(frozen=True)
class EgoStatus:
    """Current ego kinematics and navigation command.

    *command* is a one-hot 3-tuple over `COMMANDS`.
    """

    velocity: tuple = (0.0, 0.0)
    acceleration: tuple = (0.0, 0.0)
    command: tuple = (0, 1, 0)

    def __post_init__(self):
        vel = tuple(float(v) for v in self.velocity)
        acc = tuple(float(a) for a in self.acceleration)
        cmd = tuple(int(c) for c in self.command)
        if len(vel) != 2 or len(acc) != 2:
            raise ShapeError('ego status', (len(vel),), (len(acc),),
                             detail='velocity and acceleration are 2-vectors')
        if not np.all(np.isfinite(vel + acc)):
            raise ValueError('ego status must be finite')
        if len(cmd) != 3 or sorted(cmd) != [0, 0, 1]:
            raise ValueError('command must be one-hot over %s, got %r'
                             % (COMMANDS, self.command))
        object.__setattr__(self, 'velocity', vel)
        object.__setattr__(self, 'acceleration', acc)
        object.__setattr__(self, 'command', cmd)

    @classmethod
    def from_command(cls, velocity, acceleration, command):
        onehot = [0, 0, 0]
        onehot[COMMANDS.index(command)] = 1
        return cls(velocity, acceleration, tuple(onehot))

    @property
    def command_name(self):
        return COMMANDS[self.command.index(1)]

    @property
    def speed(self):
        return float(np.hypot(*self.velocity))

    def features(self):
        """``(vx, vy, ax, ay, left, straight, right)``."""
        return np.array(self.velocity + self.acceleration + self.command,
                        dtype=np.float64)

    def to_dict(self):
        return {'velocity': list(self.velocity),
                'acceleration': list(self.acceleration),
                'command': self.command_name}

    @classmethod
    def from_dict(cls, d):
        return cls.from_command(d['velocity'], d['acceleration'], d['command'])


@dataclasses.dataclass(eq=False)
class BevGrid:
    """Channels-last BEV features ``(..., H, W, C)`` on a known grid."""

    values: tc.Tensor
    meta: GridMeta

    def __post_init__(self):
        self.values = tc.as_tensor(self.values)
        if self.values.ndim < 3 or self.values.shape[-3:-1] != self.meta.shape:
            raise ShapeError('bev grid', self.values.shape, self.meta.shape)

    @property
    def channels(self):
        return self.values.shape[-1]

    def tokens(self):
        """Flatten to ``(..., H*W, C)`` in row-major cell order."""
        v = self.values
        return tc.reshape(v, v.shape[:-3] + (v.shape[-3] * v.shape[-2], v.shape[-1]))


@dataclasses.dataclass(eq=False)
class EncoderOutput:
    f_bev: BevGrid
    f_ego: tc.Tensor
    heatmap: tc.Tensor
    f_traj: BevGrid


class EgoEncoder(nn.Module):

    def __init__(self, width, rng, zero_last=False):
        self.mlp = nn.MLP(EGO_FEATURES, width, width, rng, activation='relu',
                          zero_last=zero_last)

    def forward(self, features):
        features = tc.as_tensor(features)
        if features.shape[-1] != EGO_FEATURES:
            raise ShapeError('ego encoder', features.shape,
                             detail='expected %d features' % EGO_FEATURES)
        if features.ndim == 1:
            features = tc.reshape(features, (1, EGO_FEATURES))
        return self.mlp(features)


class HeatmapDecoder(nn.Module):
    """Two rounds of 2x nearest up-sampling and 3x3 convolution, then a
    zero-initialized 1x1 head and a logistic."""

    def __init__(self, width, rng):
        self.conv1 = nn.Conv2d(width, width, 3, rng)
        self.conv2 = nn.Conv2d(width, width, 3, rng)
        self.head = nn.Linear(width, 1, rng, zero=True)

    def forward(self, grid):
        x = tc.relu(self.conv1(tc.upsample2x(grid)))
        x = tc.relu(self.conv2(tc.upsample2x(x)))
        return tc.sigmoid(self.head(x))


class TrajectoryBevEncoder(nn.Module):
    """
    Heatmap queries, ego embedding, heatmap decoder and TrajBEV fusion.

    **Parameters:**

    - *meta*: `GridMeta` of the BEV features; both sides must be
      multiples of 4.

    - *width*: Model width ``C``.

    - *rng*: `numpy.random.Generator` used for initialization.

    - *heads*, *depth*: Attention heads and number of query layers.
    """

    def __init__(self, meta, width, rng, heads=4, depth=2):
        if meta.height % 4 or meta.width % 4:
            raise GridError('grid sides must be multiples of 4, got %dx%d'
                            % meta.shape)
        self.meta = meta
        self.width = width
        self.num_queries = (meta.height // 4) * (meta.width // 4)
        self.queries = nn.uniform_parameter(rng, (self.num_queries, width), 0.02)
        self.ego = EgoEncoder(width, rng)
        self.layers = [nn.CrossAttentionLayer(width, heads, rng)
                       for _ in range(depth)]
        self.decoder = HeatmapDecoder(width, rng)
        self.fusion = nn.Linear(width + 1, width, rng)

    def encode_ego_status(self, ego):
        """Embed ego status features ``(..., 7)`` (or an `EgoStatus`) to
        ``(..., 1, C)``."""
        if isinstance(ego, EgoStatus):
            ego = ego.features()
        features = tc.as_tensor(ego)
        if features.ndim >= 2 and features.shape[-2] != 1:
            features = tc.reshape(features, features.shape[:-1] + (1, EGO_FEATURES))
        return self.ego(features)

    def heatmap_queries_attend(self, f_bev, f_ego, queries=None):
        """
        Refine the heatmap queries against ``concat(flatten(f_bev), f_ego)``.

        **Parameters:**

        - *f_bev*: `BevGrid` with ``C`` channels.

        - *f_ego*: ``(..., 1, C)`` ego feature.

        - *queries*: Optional ``(N, C)`` query tensor; the learned queries
          by default.

        **Returns:** ``(..., N, C)`` refined queries.
        """
        q = self.queries if queries is None else tc.as_tensor(queries)
        f_ego = tc.as_tensor(f_ego)
        tokens = f_bev.tokens()
        if tokens.shape[-1] != q.shape[-1] or f_ego.shape[-1] != q.shape[-1]:
            raise ShapeError('heatmap_queries_attend', q.shape, tokens.shape,
                             f_ego.shape, detail='widths differ')
        if f_ego.ndim < tokens.ndim:
            f_ego = tc.reshape(f_ego, (1,) * (tokens.ndim - f_ego.ndim) + f_ego.shape)
        lead = np.broadcast_shapes(tokens.shape[:-2], f_ego.shape[:-2])
        tokens = _broadcast_lead(tokens, lead, 2)
        f_ego = _broadcast_lead(f_ego, lead, 2)
        tokens = tc.concat([tokens, f_ego], axis=-2)
        for layer in self.layers:
            q = layer(q, tokens)
        return q

    def decode_heatmap(self, q_hat):
        """Decode ``(..., N, C)`` queries into an ``(..., H, W, 1)`` heatmap."""
        q_hat = tc.as_tensor(q_hat)
        h4, w4 = self.meta.height // 4, self.meta.width // 4
        if q_hat.ndim < 2 or q_hat.shape[-2] != h4 * w4:
            raise ShapeError('decode_heatmap', q_hat.shape,
                             detail='expected %d queries for a %dx%d grid'
                             % (h4 * w4, self.meta.height, self.meta.width))
        grid = tc.reshape(q_hat, q_hat.shape[:-2] + (h4, w4, q_hat.shape[-1]))
        return self.decoder(grid)

    def fuse_trajbev(self, f_bev, f_heat):
        """Concatenate the heatmap as an extra channel and project back to
        ``C`` channels with a 1x1 convolution."""
        f_heat = tc.as_tensor(f_heat)
        values = f_bev.values
        if f_heat.shape[-1] != 1 or f_heat.shape[-3:-1] != values.shape[-3:-1]:
            raise ShapeError('fuse_trajbev', values.shape, f_heat.shape,
                             detail='grids must be congruent')
        lead = np.broadcast_shapes(values.shape[:-3], f_heat.shape[:-3])
        fused = tc.concat([_broadcast_lead(values, lead, 3),
                           _broadcast_lead(f_heat, lead, 3)], axis=-1)
        return BevGrid(self.fusion(fused), f_bev.meta)

    def forward(self, f_bev, ego, trajbev=True):
        """
        Run the whole encoder.

        With *trajbev* false the heatmap is still decoded, but the fused
        feature is ``f_bev`` itself.
        """
        f_ego = self.encode_ego_status(ego)
        q_hat = self.heatmap_queries_attend(f_bev, f_ego)
        heat = self.decode_heatmap(q_hat)
        f_traj = self.fuse_trajbev(f_bev, heat) if trajbev else f_bev
        return EncoderOutput(f_bev, f_ego, heat, f_traj)


def _broadcast_lead(x, lead, tail):
    """Broadcast the leading axes of *x* to *lead*, keeping its last *tail*
    axes, differentiably."""
    lead = tuple(lead)
    if x.shape[:-tail] == lead:
        return x
    return x + np.zeros(lead + (1,) * tail)
