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
Inference: load a trained planner and draw trajectories with DDIM.
"""

import dataclasses
import logging

import numpy as np

from .. import tensorcore as tc
from ..diffusion import TrajectoryNormalizer, ddim_sample, make_schedule
from ..model import TrajDiffModel
from ..scoring import INVALID, BestOfK, score_trajectory
from ..world import Trajectory, check_grid, rasterize_scenario
from .checkpoint import Checkpoint, load_checkpoint
from .config import config_from_dict

__all__ = ['Planner', 'PlanResult', 'plan', 'evaluate', 'rollout_rng']

log = logging.getLogger(__name__)


def rollout_rng(seed, k):
    """Generator of rollout *k*; rollout streams do not depend on how many
    rollouts are drawn."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(k),)))


@dataclasses.dataclass(eq=False)
class PlanResult:
    trajectories: list
    reports: list
    best: BestOfK

    @property
    def best_trajectory(self):
        i = int(np.argmax([r.pdms for r in self.reports]))
        return self.trajectories[i]


class Planner:
    """
    A trained model together with its normalizer and noise schedule.

    **Parameters:**

    - *model*: `trajdiff.model.TrajDiffModel`.

    - *cfg*: `trajdiff.driver.config.TrainConfig` the model was trained
      with.

    - *normalizer*: `trajdiff.diffusion.TrajectoryNormalizer`.
    """

    def __init__(self, model, cfg, normalizer):
        self.model = model
        self.cfg = cfg
        self.normalizer = normalizer
        self.schedule = make_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
        self.meta = cfg.grid_meta()

    @classmethod
    def from_checkpoint(cls, ckpt):
        """Build a planner from a `Checkpoint` or a checkpoint path."""
        if not isinstance(ckpt, Checkpoint):
            ckpt = load_checkpoint(ckpt)
        cfg = config_from_dict(ckpt.config)
        with tc.default_dtype(cfg.np_dtype):
            model = TrajDiffModel(cfg.model_dims(), cfg.ablation_flags(),
                                  np.random.default_rng(0))
        model.load_state_dict(ckpt.params())
        return cls(model, cfg, TrajectoryNormalizer.from_dict(ckpt.normalizer))

    def context(self, scenario):
        """Run the encoder and the step-independent part of the denoiser."""
        check_grid(scenario, self.meta)
        raster = rasterize_scenario(scenario)[None]
        ego = scenario.ego0.features()[None]
        with tc.no_grad():
            enc = self.model.encode(raster, ego)
            return self.model.tbdit.prepare(enc.f_traj)

    def rollouts(self, scenario, K=1, steps=None, seed=0):
        """
        Draw *K* trajectories for one scenario.

        Rollout *k* starts from its own Gaussian draw seeded by
        ``(seed, k)``, so the first *K* rollouts are the same whatever the
        total.  Rollouts that produce non-finite waypoints are returned as
        ``None``.
        """
        if int(K) != K or K < 1:
            raise ValueError('K must be a positive integer, got %r' % K)
        steps = self.cfg.ddim_steps if steps is None else steps
        shape = (1, self.cfg.horizon_points, 3)
        out = []
        with tc.default_dtype(self.cfg.np_dtype):
            eps_model = self.model.eps_model(self.context(scenario))
            for k in range(int(K)):
                x_T = rollout_rng(seed, k).standard_normal(shape)
                x0 = ddim_sample(eps_model, None, self.schedule, steps, x_T)
                points = self.normalizer.denormalize(x0[0])
                if np.all(np.isfinite(points)):
                    out.append(Trajectory(points, self.cfg.dt))
                else:
                    log.warning('scenario %d: rollout %d is not finite', scenario.seed, k)
                    out.append(None)
        return out

    def plan(self, scenario, K=1, steps=None, seed=0):
        """
        Plan and score.

        **Parameters:**

        - *scenario*: `trajdiff.world.Scenario` on the planner's grid.

        - *K*: Number of rollouts.

        - *steps*: DDIM steps; defaults to the configured ``ddim_steps``.

        - *seed*: Seed of the initial draws.

        **Returns:** `PlanResult` with the trajectories, their
        `trajdiff.scoring.ScoreReport` and the best-of-K summary.

        **Raises:** `GridError` when the scenario grid differs from the
        planner's.
        """
        trajectories = self.rollouts(scenario, K, steps, seed)
        config = self.cfg.scoring_config()
        reports = [INVALID if t is None else score_trajectory(scenario, t, config)
                   for t in trajectories]
        scores = np.array([r.pdms for r in reports])
        best = BestOfK(float(scores.max()), float(scores.std()), tuple(scores))
        return PlanResult(trajectories, reports, best)


def plan(checkpoint, scenario, K=1, steps=None, seed=0):
    """`Planner.plan` for a `Checkpoint` or checkpoint path."""
    return Planner.from_checkpoint(checkpoint).plan(scenario, K, steps, seed)


def evaluate(planner, scenarios, K=1, steps=None, seed=0):
    """
    Score a planner on several scenarios.

    **Returns:** list of ``(scenario_seed, ScoreReport)``, taking for each
    scenario the best of its *K* rollouts.
    """
    rows = []
    for s in scenarios:
        result = planner.plan(s, K, steps, seed)
        i = int(np.argmax([r.pdms for r in result.reports]))
        rows.append((s.seed, result.reports[i]))
    log.info('evaluated %d scenarios', len(rows))
    return rows
