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
Trajectory-oriented BEV diffusion transformer: the noise predictor.

The condition is the sum of a timestep embedding and an ego query refined
against the TrajBEV tokens.  A Q-former style set of learned queries
compresses the TrajBEV grid to a few tokens.  Each block applies temporal
self-attention over the waypoints, cross-attention to the compressed BEV
tokens and an MLP, each wrapped in adaLN-Zero modulation so that a freshly
initialized block is the identity map.
"""

import dataclasses
import logging
import math

import numpy as np

from . import nn
from . import tensorcore as tc
from .errors import ScheduleError, ShapeError

__all__ = ['Condition', 'LatentTrajectory', 'BevQuerySet', 'DenoiserContext',
           'TBDiTBlock', 'TBDiT', 'modulate', 'sinusoidal_embedding']

log = logging.getLogger(__name__)


@dataclasses.dataclass(eq=False)
class Condition:
    """``(..., 1, C)`` conditioning vector."""

    value: tc.Tensor


@dataclasses.dataclass(eq=False)
class LatentTrajectory:
    """``(..., T_f, C)`` waypoint features."""

    value: tc.Tensor


@dataclasses.dataclass(eq=False)
class BevQuerySet:
    """``(..., M, C)`` compressed BEV tokens."""

    value: tc.Tensor


@dataclasses.dataclass(eq=False)
class DenoiserContext:
    """Everything the denoiser needs that does not depend on the step:
    the refined ego query and the compressed BEV tokens (or ``None`` when
    BEV cross-attention is disabled)."""

    q_ego: tc.Tensor
    q_bev: object


def modulate(x, scale, shift):
    """``x * (1 + scale) + shift``."""
    return x * (1.0 + scale) + shift


def sinusoidal_embedding(t, dim, max_period=10000.0):
    """
    Raw timestep embedding with interleaved sines and cosines:
    ``[sin(t f_0), cos(t f_0), sin(t f_1), ...]`` with geometrically
    spaced frequencies ``f_k = max_period^(-k / (dim/2))``.
    """
    if dim % 2:
        raise ValueError('embedding width must be even, got %d' % dim)
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half) / half)
    args = t[..., None] * freqs
    out = np.empty(t.shape + (dim,))
    out[..., 0::2] = np.sin(args)
    out[..., 1::2] = np.cos(args)
    return out


class TBDiTBlock(nn.Module):
    """
    One denoiser block.  Each sub-stage computes
    ``z + gate * Sub(modulate(LN(z), scale, shift))`` where scale, shift and
    gate come from a zero-initialized linear map of ``SiLU(c)``.
    """

    def __init__(self, width, heads, rng, bev_cross=True, mlp_ratio=4):
        self.width = width
        self.bev_cross = bev_cross
        self.stages = 3 if bev_cross else 2
        self.modulation = nn.Linear(width, 3 * self.stages * width, rng, zero=True)
        self.self_attn = nn.MultiHeadAttention(width, heads, rng)
        self.cross_attn = nn.MultiHeadAttention(width, heads, rng) if bev_cross else None
        self.mlp = nn.MLP(width, mlp_ratio * width, width, rng, activation='gelu')

    def _chunks(self, c):
        mod = self.modulation(tc.silu(c))
        w = self.width
        return [tc.index(mod, (Ellipsis, slice(i * w, (i + 1) * w)))
                for i in range(3 * self.stages)]

    def forward(self, z, c, q_bev=None):
        z, c = tc.as_tensor(z), tc.as_tensor(c)
        if z.shape[-1] != self.width or c.shape[-1] != self.width:
            raise ShapeError('tbdit block', z.shape, c.shape,
                             detail='widths must be %d' % self.width)
        chunks = self._chunks(c)
        scale, shift, gate = chunks[0:3]
        z = z + gate * self.self_attn(modulate(tc.layer_norm(z), scale, shift))
        k = 3
        if self.bev_cross:
            if q_bev is None:
                raise ValueError('block built with BEV cross-attention needs q_bev')
            q_bev = tc.as_tensor(q_bev)
            if q_bev.shape[-1] != self.width:
                raise ShapeError('tbdit block', z.shape, q_bev.shape,
                                 detail='BEV tokens must have width %d' % self.width)
            scale, shift, gate = chunks[3:6]
            z = z + gate * self.cross_attn(modulate(tc.layer_norm(z), scale, shift),
                                           q_bev)
            k = 6
        scale, shift, gate = chunks[k:k + 3]
        return z + gate * self.mlp(modulate(tc.layer_norm(z), scale, shift))


class TBDiT(nn.Module):
    """
    The noise predictor ``eps_theta(x_t, t, q_ego, f_traj)``.

    **Parameters:**

    - *width*, *heads*: Model width ``C`` and attention heads.

    - *horizon_points*: Waypoints per trajectory ``T_f``.

    - *num_steps*: Diffusion length ``T``; timesteps outside ``[0, T]``
      are rejected.

    - *rng*: Initialization generator.

    - *blocks*, *eb_depth*, *qformer_depth*, *bev_queries*: Depths and the
      number ``M`` of compressed BEV tokens.

    - *eb_interaction*, *bev_cross*: Ablation switches.  Without ego-BEV
      interaction the raw learned ego query enters the condition; without
      BEV cross-attention the blocks have two sub-stages and no Q-former is
      built.
    """

    def __init__(self, width, heads, horizon_points, num_steps, rng, blocks=4,
                 eb_depth=2, qformer_depth=1, bev_queries=16,
                 eb_interaction=True, bev_cross=True):
        self.width = width
        self.horizon_points = horizon_points
        self.num_steps = num_steps
        self.eb_interaction = eb_interaction
        self.bev_cross = bev_cross
        self.ego_query = nn.normal_parameter(rng, (1, width))
        self.eb_layers = [nn.CrossAttentionLayer(width, heads, rng)
                          for _ in range(eb_depth if eb_interaction else 0)]
        self.time_mlp = nn.MLP(width, width, width, rng, activation='silu')
        if bev_cross:
            self.bev_queries = nn.normal_parameter(rng, (bev_queries, width))
            self.qformer = [nn.CrossAttentionLayer(width, heads, rng)
                            for _ in range(qformer_depth)]
        self.traj_in = nn.Linear(3, width, rng)
        self.traj_pos = nn.normal_parameter(rng, (horizon_points, width))
        self.blocks = [TBDiTBlock(width, heads, rng, bev_cross=bev_cross)
                       for _ in range(blocks)]
        self.final_norm = nn.LayerNorm(width)
        self.head = nn.Linear(width, 3, rng, zero=True)

    def _tokens(self, f_traj):
        tokens = f_traj.tokens() if hasattr(f_traj, 'tokens') else tc.as_tensor(f_traj)
        if tokens.shape[-1] != self.width:
            raise ShapeError('tbdit', tokens.shape,
                             detail='BEV tokens must have width %d' % self.width)
        return tokens

    def ego_bev_interaction(self, f_traj, q_ego=None):
        """Refine the ego query ``(1, C)`` against the TrajBEV tokens."""
        q = self.ego_query if q_ego is None else tc.as_tensor(q_ego)
        tokens = self._tokens(f_traj)
        if q.shape[-1] != self.width:
            raise ShapeError('ego_bev_interaction', q.shape, tokens.shape)
        for layer in self.eb_layers:
            q = layer(q, tokens)
        return q

    def timestep_embed(self, t):
        """Embed step index(es) *t* in ``[0, T]`` to ``(..., 1, C)``."""
        t_arr = np.asarray(t)
        if np.any(t_arr < 0) or np.any(t_arr > self.num_steps):
            raise ScheduleError('timestep out of range [0, %d]: %r'
                                % (self.num_steps, t))
        raw = sinusoidal_embedding(t_arr, self.width)
        return self.time_mlp(raw.reshape(t_arr.shape + (1, self.width)))

    def compress_bev(self, f_traj):
        """Compress TrajBEV tokens to ``(..., M, C)`` with learned queries."""
        tokens = self._tokens(f_traj)
        q = self.bev_queries
        for layer in self.qformer:
            q = layer(q, tokens)
        return BevQuerySet(q)

    def encode_traj(self, x_t):
        """Lift ``(..., T_f, 3)`` waypoints to ``(..., T_f, C)``."""
        x_t = tc.as_tensor(x_t)
        if x_t.shape[-2:] != (self.horizon_points, 3):
            raise ShapeError('encode_traj', x_t.shape, (self.horizon_points, 3))
        return LatentTrajectory(self.traj_in(x_t) + self.traj_pos)

    def condition(self, t, q_ego):
        return Condition(self.timestep_embed(t) + q_ego)

    def tbdit_block(self, index, z, c, q_bev=None):
        """Apply block *index* to a `LatentTrajectory`."""
        q = None if q_bev is None else q_bev.value
        return LatentTrajectory(self.blocks[index](z.value, c.value, q))

    def prepare(self, f_traj):
        """Compute the step-independent part of the denoiser once."""
        q_ego = self.ego_bev_interaction(f_traj)
        q_bev = self.compress_bev(f_traj) if self.bev_cross else None
        return DenoiserContext(q_ego, q_bev)

    def denoise(self, x_t, t, context):
        c = self.condition(t, context.q_ego)
        z = self.encode_traj(x_t)
        for i in range(len(self.blocks)):
            z = self.tbdit_block(i, z, c, context.q_bev)
        return self.head(self.final_norm(z.value))

    def predict_noise(self, x_t, t, f_traj):
        """
        Predict the noise in *x_t*.

        **Parameters:**

        - *x_t*: Noised normalized trajectories ``(..., T_f, 3)``.

        - *t*: Step index, scalar or one per leading element.

        - *f_traj*: `trajdiff.encoder.BevGrid` (or tokens ``(..., L, C)``).

        **Returns:** ``(..., T_f, 3)`` `Tensor`.
        """
        return self.denoise(x_t, t, self.prepare(f_traj))

    def forward(self, x_t, t, f_traj):
        return self.predict_noise(x_t, t, f_traj)
