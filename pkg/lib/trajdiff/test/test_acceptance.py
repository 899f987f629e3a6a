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
Desk-scale training trends: 500 training scenarios, 50 held out, three
seeds.  Each test trains several planners, so the module is marked slow.
"""

import dataclasses

import numpy as np
import pytest

from trajdiff import tensorcore as tc
from trajdiff.driver.planning import Planner, evaluate
from trajdiff.driver.studies import (StudyConfig, make_study_data, run_ablation,
                                     run_bok_study, run_noise_study, run_scale_study,
                                     train_planner)
from trajdiff.encoder import COMMANDS, EgoStatus
from trajdiff.model import TrajDiffModel
from trajdiff.scoring import constant_velocity_plan, score_trajectory

pytestmark = pytest.mark.slow


@pytest.fixture(scope='module')
def desk_cfg():
    return StudyConfig(progress=False)


@pytest.fixture(scope='module')
def desk_data(desk_cfg):
    return make_study_data(desk_cfg)


@pytest.fixture(scope='module')
def desk_planners(desk_cfg, desk_data):
    return [train_planner(desk_cfg.training_config(seed=seed), desk_data.train)
            for seed in desk_cfg.study_seeds]


def mean_pdms(planner, scenarios, seed=0):
    return float(np.mean([r.pdms for _, r in evaluate(planner, scenarios, seed=seed)]))


def means(rows):
    return {r['variant']: r['pdms'] for r in rows if r['seed'] == 'mean'}


def per_seed(rows, variant):
    return [r['pdms'] for r in rows if r['variant'] == variant and r['seed'] != 'mean']


def test_trained_planner_beats_untrained_and_baseline(desk_cfg, desk_data, desk_planners):
    config = desk_cfg.scoring_config()
    baseline = np.mean([score_trajectory(s, constant_velocity_plan(s), config).pdms
                        for s in desk_data.val])
    for seed, planner in zip(desk_cfg.study_seeds, desk_planners):
        with tc.default_dtype(planner.cfg.np_dtype):
            fresh = TrajDiffModel(planner.cfg.model_dims(), planner.cfg.ablation_flags(),
                                  np.random.default_rng(seed))
        untrained = Planner(fresh, planner.cfg, planner.normalizer)
        trained = mean_pdms(planner, desk_data.val, seed)
        assert trained >= mean_pdms(untrained, desk_data.val, seed) + 0.10
        assert trained >= baseline + 0.10


def test_command_changes_the_plan(desk_data, desk_planners):
    planner = desk_planners[0]
    changed = 0
    for s in desk_data.val:
        other = COMMANDS[(COMMANDS.index(s.ego0.command_name) + 1) % len(COMMANDS)]
        ego = EgoStatus.from_command(s.ego0.velocity, s.ego0.acceleration, other)
        a = planner.rollouts(s, 1)[0]
        b = planner.rollouts(dataclasses.replace(s, ego0=ego), 1)[0]
        changed += a is not None and b is not None and \
            float(np.linalg.norm(a.points - b.points)) > 0.0
    assert changed >= 0.9 * len(desk_data.val)


def test_commands_have_distinct_embeddings(desk_planners):
    encoder = desk_planners[0].model.encoder
    with tc.no_grad(), tc.default_dtype(desk_planners[0].cfg.np_dtype):
        embeddings = [encoder.encode_ego_status(
            EgoStatus.from_command((4.0, 0.0), (0.0, 0.0), c)).numpy()
            for c in COMMANDS]
    for i in range(len(COMMANDS)):
        for j in range(i + 1, len(COMMANDS)):
            assert not np.array_equal(embeddings[i], embeddings[j])


def test_ablation_direction(desk_cfg):
    table = means(run_ablation(desk_cfg))
    for variant in ('no-eb', 'no-bev-cross'):
        assert table['full'] >= table[variant] - 0.01
    assert table['full'] > table['no-trajbev']
    assert table['full'] >= table['baseline']


def test_best_of_k_is_monotone(desk_cfg):
    rows = run_bok_study(desk_cfg.replace(val_count=100))
    for seed in desk_cfg.study_seeds:
        by_k = {r['variant']: r for r in rows if r['seed'] == seed}
        curve = [by_k['K=%d' % k]['pdms'] for k in (1, 3, 5, 10)]
        assert curve == sorted(curve)
        assert by_k['K=10']['std'] > 0.0


def test_resampling_does_not_hurt(desk_cfg):
    rows = run_scale_study(desk_cfg)
    with_resample = per_seed(rows, 'resample=True,extra=False')
    without = per_seed(rows, 'resample=False,extra=False')
    assert sum(a >= b for a, b in zip(with_resample, without)) >= 2


def test_trajectory_noise_costs_little(desk_cfg):
    table = means(run_noise_study(desk_cfg))
    assert table['sigma=0.1'] >= table['sigma=0'] - 0.03
    assert table['sigma=1'] >= table['sigma=0'] - 0.03
