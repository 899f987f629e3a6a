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
Annotation-free diffusion trajectory planning on a synthetic driving
world.

The planner encodes a bird's-eye-view raster and the ego status, predicts
a heatmap of where the ego vehicle will drive, fuses it back into the BEV
features and denoises a trajectory with a transformer conditioned on
those features.  Supervision comes from expert trajectories only.
"""

from .version import *
from .errors import *
from .heatmap import GridMeta, RadiusPolicy, gaussian_bev_target, gaussian_focal_loss
from .diffusion import (make_schedule, forward_noise, ddpm_step, ddpm_sample,
                        ddim_sample)
from .world import Trajectory, Scenario, generate_scenario, resample_trajectory
from .scoring import ScoreReport, score_trajectory, pdms, best_of_k
from .model import TrajDiffModel
