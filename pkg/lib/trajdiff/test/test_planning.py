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

import numpy as np
import pytest

from trajdiff.diffusion import TrajectoryNormalizer
from trajdiff.driver.checkpoint import checkpoint_bytes, checkpoint_from_bytes, save_checkpoint
from trajdiff.driver.planning import Planner, evaluate, plan, rollout_rng
from trajdiff.errors import GridError
from trajdiff.scoring import ScoreReport
from trajdiff.world import Trajectory, generate_scenario


@pytest.fixture(scope='module')
def planner(tiny_run):
    return Planner.from_checkpoint(tiny_run.checkpoint)


def same_trajectories(a, b):
    return len(a) == len(b) and all(np.array_equal(x.points, y.points) for x, y in zip(a, b))


def test_rollout_streams_are_nested():
    a = rollout_rng(3, 2).standard_normal(5)
    assert np.array_equal(a, rollout_rng(3, 2).standard_normal(5))
    assert not np.array_equal(a, rollout_rng(3, 1).standard_normal(5))
    assert not np.array_equal(a, rollout_rng(4, 2).standard_normal(5))


def test_default_steps(planner, tiny_data):
    s = tiny_data[0]
    assert same_trajectories(planner.rollouts(s, 2), planner.rollouts(s, 2, steps=5))


def test_plan_shapes(planner, tiny_data):
    result = planner.plan(tiny_data[0], K=3)
    assert len(result.trajectories) == 3
    assert all(isinstance(r, ScoreReport) for r in result.reports)
    for t in result.trajectories:
        assert isinstance(t, Trajectory)
        assert t.points.shape == (8, 3)
        assert t.dt == 0.5
    assert result.best.best == max(r.pdms for r in result.reports)
    assert len(result.best.scores) == 3
    assert any(t is result.best_trajectory for t in result.trajectories)


def test_same_seed_same_rollouts(planner, tiny_data):
    s = tiny_data[1]
    a = planner.rollouts(s, 4, seed=5)
    b = planner.rollouts(s, 4, seed=5)
    assert same_trajectories(a, b)
    c = planner.rollouts(s, 4, seed=6)
    assert not same_trajectories(a, c)


def test_rollouts_form_a_superset(planner, tiny_data):
    s = tiny_data[2]
    few = planner.rollouts(s, 2, seed=1)
    many = planner.rollouts(s, 10, seed=1)
    assert same_trajectories(few, many[:2])
    assert planner.plan(s, 10, seed=1).best.best >= planner.plan(s, 1, seed=1).best.best


def test_checkpoint_round_trip_plans_identically(planner, tiny_run, tiny_data, tmp_path):
    reloaded = Planner.from_checkpoint(checkpoint_from_bytes(checkpoint_bytes(tiny_run.checkpoint)))
    s = tiny_data[0]
    assert same_trajectories(planner.rollouts(s, 3, seed=2), reloaded.rollouts(s, 3, seed=2))
    path = str(tmp_path / 'ckpt.tdc')
    save_checkpoint(tiny_run.checkpoint, path)
    from_file = plan(path, s, 3, seed=2)
    assert same_trajectories(from_file.trajectories, planner.rollouts(s, 3, seed=2))


def test_trained_planner_matches_checkpoint(planner, tiny_run, tiny_cfg, tiny_data):
    direct = Planner(tiny_run.model, tiny_cfg.replace(epochs=2),
                     TrajectoryNormalizer.from_dict(tiny_run.checkpoint.normalizer))
    s = tiny_data[0]
    assert same_trajectories(direct.rollouts(s, 2), planner.rollouts(s, 2))


def test_step_count_changes_output(planner, tiny_data):
    s = tiny_data[0]
    a = planner.rollouts(s, 1, steps=2)[0]
    b = planner.rollouts(s, 1, steps=10)[0]
    assert not np.array_equal(a.points, b.points)


def test_bad_requests(planner, tiny_data):
    with pytest.raises(ValueError):
        planner.plan(tiny_data[0], K=0)
    with pytest.raises(GridError):
        planner.plan(generate_scenario(0), K=1)


def test_evaluate(planner, tiny_data):
    rows = evaluate(planner, tiny_data, K=2)
    assert [sid for sid, _ in rows] == [s.seed for s in tiny_data]
    assert all(0.0 <= r.pdms <= 1.0 for _, r in rows)
