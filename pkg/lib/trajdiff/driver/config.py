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
Run configuration.

A configuration file is a flat JSON object.  Every key has a default;
unknown keys are rejected.
"""

import dataclasses
import json
import logging

import numpy as np

from ..errors import ConfigError
from ..heatmap import GridMeta, RadiusPolicy
from ..model import AblationFlags, ModelDims
from ..scoring import CompositeWeights, ScoringConfig
from ..world import WorldParams

__all__ = ['TrainConfig', 'load_config', 'save_config', 'config_from_dict']

log = logging.getLogger(__name__)


@dataclasses.dataclass
class TrainConfig:
    # loss
    w_bev: float = 200.0
    w_diff: float = 10.0
    focal_alpha: float = 2.0
    focal_gamma: float = 4.0

    # optimization
    epochs: int = 60
    batch_size: int = 32
    lr: float = 3e-4
    cosine: bool = True
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    grad_clip: float = 1.0
    seed: int = 0
    dtype: str = 'float32'
    progress: bool = True

    # diffusion
    T: int = 100
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    ddim_steps: int = 20

    # ablation
    trajbev: bool = True
    eb_interaction: bool = True
    bev_cross: bool = True

    # heatmap target
    radius_mode: str = 'velocity'
    radius: float = 5.0
    radius_gamma: float = 0.4
    radius_sigma_min: float = 0.5
    heatmap_snap: bool = True

    # augmentation; offsets are fractions of dt
    resample_offsets: tuple = (0.25, 0.5)
    noise_sigma: float = 0.0
    noise_fraction: float = 0.1

    # model
    grid_height: int = 32
    grid_width: int = 32
    grid_resolution: float = 1.0
    grid_origin_x: float = -7.5
    grid_origin_y: float = -15.5
    width: int = 32
    heads: int = 4
    encoder_depth: int = 2
    eb_depth: int = 2
    qformer_depth: int = 1
    bev_queries: int = 16
    blocks: int = 4
    horizon_points: int = 8
    dt: float = 0.5

    # scoring
    score_ego_radius: float = 1.0
    score_interp_hz: float = 10.0
    score_ttc_horizon: float = 1.0
    score_max_accel: float = 3.0
    score_max_jerk: float = 10.0
    score_w_ttc: float = 5.0
    score_w_comf: float = 2.0
    score_w_ep: float = 5.0

    def __post_init__(self):
        self.resample_offsets = tuple(float(o) for o in self.resample_offsets)
        checks = [
            (self.w_bev >= 0 and self.w_diff >= 0, 'loss weights must be nonnegative'),
            (self.batch_size >= 1, 'batch_size must be at least 1'),
            (self.epochs >= 0, 'epochs must be nonnegative'),
            (self.lr > 0, 'lr must be positive'),
            (self.grad_clip >= 0, 'grad_clip must be nonnegative (0 disables)'),
            (self.T >= 2, 'T must be at least 2'),
            (1 <= self.ddim_steps <= self.T, 'ddim_steps must lie in [1, T]'),
            (self.dtype in ('float32', 'float64'), 'dtype must be float32 or float64'),
            (all(0.0 < o < 1.0 for o in self.resample_offsets),
             'resample offsets must lie in (0, 1) units of dt'),
            (self.noise_sigma >= 0, 'noise_sigma must be nonnegative'),
            (0.0 <= self.noise_fraction <= 1.0, 'noise_fraction must lie in [0, 1]'),
            (self.width % self.heads == 0, 'width must be divisible by heads'),
            (self.grid_height % 4 == 0 and self.grid_width % 4 == 0,
             'grid sides must be multiples of 4'),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        try:
            self.grid_meta()
            self.radius_policy()
        except ValueError as e:
            raise ConfigError(str(e))

    def grid_meta(self):
        return GridMeta(self.grid_height, self.grid_width, self.grid_resolution,
                        (self.grid_origin_x, self.grid_origin_y))

    def model_dims(self):
        return ModelDims(self.grid_meta(), self.width, self.heads,
                         self.encoder_depth, self.eb_depth, self.qformer_depth,
                         self.bev_queries, self.blocks, self.horizon_points, self.T)

    def ablation_flags(self):
        return AblationFlags(self.trajbev, self.eb_interaction, self.bev_cross)

    def world_params(self, **changes):
        """Generator parameters matching the grid and horizon."""
        return WorldParams(meta=self.grid_meta(), horizon_points=self.horizon_points,
                           dt=self.dt, **changes)

    def radius_policy(self):
        return RadiusPolicy(self.radius_mode, self.radius, self.radius_gamma,
                            self.radius_sigma_min)

    def scoring_config(self):
        weights = CompositeWeights(self.score_w_ttc, self.score_w_comf, self.score_w_ep)
        return ScoringConfig(ego_radius=self.score_ego_radius,
                             interp_hz=self.score_interp_hz,
                             ttc_horizon=self.score_ttc_horizon,
                             max_accel=self.score_max_accel,
                             max_jerk=self.score_max_jerk, weights=weights)

    @property
    def np_dtype(self):
        return np.dtype(self.dtype).type

    def to_dict(self):
        d = dataclasses.asdict(self)
        d['resample_offsets'] = list(self.resample_offsets)
        return d

    def replace(self, **changes):
        return config_from_dict({**self.to_dict(), **changes}, type(self))


def config_from_dict(d, cls=TrainConfig):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError('unknown configuration keys: %s' % ', '.join(unknown))
    try:
        return cls(**d)
    except TypeError as e:
        raise ConfigError(str(e))


def load_config(path, cls=TrainConfig):
    """Read a flat JSON configuration file; missing keys take defaults."""
    if path is None:
        return cls()
    with open(path) as fd:
        try:
            d = json.load(fd)
        except ValueError as e:
            raise ConfigError('%s: %s' % (path, e))
    if not isinstance(d, dict):
        raise ConfigError('%s: configuration must be a JSON object' % path)
    log.debug('loaded configuration from %s', path)
    return config_from_dict(d, cls)


def save_config(cfg, path):
    with open(path, 'w') as fd:
        json.dump(cfg.to_dict(), fd, indent=2, sort_keys=True)
