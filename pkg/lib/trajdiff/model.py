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
The assembled planner: raster stem, trajectory-oriented BEV encoder and
diffusion transformer, with the component ablation switches.
"""

import dataclasses

import numpy as np

from . import nn
from . import tensorcore as tc
from .encoder import TrajectoryBevEncoder
from .heatmap import GridMeta
from .tbdit import TBDiT
from .world import BevStem

__all__ = ['ModelDims', 'AblationFlags', 'TrajDiffModel']


@dataclasses.dataclass(frozen=True)
class ModelDims:
    meta: GridMeta = GridMeta()
    width: int = 32
    heads: int = 4
    encoder_depth: int = 2
    eb_depth: int = 2
    qformer_depth: int = 1
    bev_queries: int = 16
    blocks: int = 4
    horizon_points: int = 8
    num_steps: int = 100


@dataclasses.dataclass(frozen=True)
class AblationFlags:
    trajbev: bool = True
    eb_interaction: bool = True
    bev_cross: bool = True


class TrajDiffModel(nn.Module):
    """
    **Parameters:**

    - *dims*: `ModelDims`.

    - *flags*: `AblationFlags`.

    - *rng*: `numpy.random.Generator` for initialization; parameters are
      created in a fixed order so equal seeds give equal models.
    """

    def __init__(self, dims=None, flags=None, rng=None):
        self.dims = ModelDims() if dims is None else dims
        self.flags = AblationFlags() if flags is None else flags
        rng = np.random.default_rng(0) if rng is None else rng
        d = self.dims
        self.stem = BevStem(d.meta, d.width, rng)
        self.encoder = TrajectoryBevEncoder(d.meta, d.width, rng, heads=d.heads,
                                            depth=d.encoder_depth)
        self.tbdit = TBDiT(d.width, d.heads, d.horizon_points, d.num_steps, rng,
                           blocks=d.blocks, eb_depth=d.eb_depth,
                           qformer_depth=d.qformer_depth, bev_queries=d.bev_queries,
                           eb_interaction=self.flags.eb_interaction,
                           bev_cross=self.flags.bev_cross)

    def encode(self, rasters, ego_features):
        """Rasters ``(..., H, W, 4)`` and ego features ``(..., 7)`` to an
        `trajdiff.encoder.EncoderOutput`."""
        f_bev = self.stem(rasters)
        return self.encoder(f_bev, ego_features, trajbev=self.flags.trajbev)

    def predict_noise(self, x_t, t, f_traj):
        return self.tbdit.predict_noise(x_t, t, f_traj)

    def forward(self, rasters, ego_features, x_t, t):
        """Heatmap and predicted noise for a batch."""
        enc = self.encode(rasters, ego_features)
        return enc.heatmap, self.predict_noise(x_t, t, enc.f_traj)

    def eps_model(self, context):
        """Adapter for the samplers in `trajdiff.diffusion`: a callable
        ``(x_t, t, condition) -> ndarray`` running without gradients."""
        def run(x_t, t, _condition):
            with tc.no_grad():
                return self.tbdit.denoise(x_t, t, context).numpy()
        return run
