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

import csv

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from trajdiff.encoder import EgoStatus
from trajdiff.scoring import (INVALID, CompositeWeights, ScoreReport, best_of_k,
                              best_of_k_curve, constant_velocity_plan, mean_report,
                              pdms, score_trajectory, write_score_table)
from trajdiff.world import Obstacle, Trajectory, build_scenario

STRAIGHT = np.column_stack([np.linspace(-8.0, 60.0, 137), np.zeros(137)])


def straight_scenario(v0, obstacles=(), cruise=None):
    return build_scenario(0, STRAIGHT, obstacles, EgoStatus((v0, 0.0)),
                          cruise_speed=cruise)


def line(speed, lateral=None):
    x = 0.5 * speed * np.arange(1, 9)
    y = np.zeros(8) if lateral is None else np.asarray(lateral, dtype=float)
    return Trajectory(np.column_stack([x, y, np.zeros(8)]))


def test_expert_scores_perfectly():
    s = straight_scenario(5.0)
    r = score_trajectory(s, s.expert)
    assert (r.nc, r.dac, r.ttc, r.comf, r.ep) == (1.0, 1.0, 1.0, 1.0, 1.0)
    assert r.pdms == 1.0
    assert r.dac_fraction == 1.0
    assert r.valid


def test_collision_zeroes_the_score():
    s = straight_scenario(5.0, [Obstacle((10.0, 0.0), 1.0)])
    r = score_trajectory(s, constant_velocity_plan(s))
    assert r.nc == 0.0
    assert r.pdms == 0.0


def test_half_progress():
    s = straight_scenario(2.5, cruise=5.0)
    assert abs(s.expert.xy[-1, 0] - 20.0) < 1e-9
    r = score_trajectory(s, line(2.5))
    assert abs(r.ep - 0.5) < 1e-9
    assert r.comf == 1.0
    assert abs(r.pdms - 0.7917) < 1e-4


def test_time_to_collision():
    s = straight_scenario(5.0, [Obstacle((23.0, 0.0), 1.0)])
    r = score_trajectory(s, line(5.0))
    assert r.nc == 1.0
    assert r.ttc == 0.0
    assert r.ep == 1.0
    assert abs(r.pdms - 7.0 / 12.0) < 1e-12


def test_leaving_the_road():
    s = straight_scenario(5.0)
    r = score_trajectory(s, line(5.0, [0, 0, 0, 0, 0, 6, 6, 6]))
    assert r.dac == 0.0
    assert 0.0 < r.dac_fraction < 1.0
    assert r.pdms == 0.0


def test_harsh_braking_is_uncomfortable():
    s = straight_scenario(5.0)
    stop = Trajectory(np.column_stack([np.full(8, 0.5), np.zeros(8), np.zeros(8)]))
    r = score_trajectory(s, stop)
    assert r.comf == 0.0
    assert r.nc == 1.0


def test_unscorable_plans():
    s = straight_scenario(5.0)
    assert score_trajectory(s, np.full((8, 3), np.nan)) == INVALID
    assert score_trajectory(s, Trajectory(np.zeros((6, 3)))) == INVALID
    assert score_trajectory(s, Trajectory(np.zeros((8, 3)), dt=0.25)) == INVALID
    assert not INVALID.valid
    assert INVALID.nc == 0.0 and INVALID.pdms == 0.0


def test_stationary_expert_gives_full_progress():
    s = straight_scenario(0.0)
    r = score_trajectory(s, Trajectory(np.zeros((8, 3))))
    assert r.ep == 1.0
    assert r.pdms == 1.0


def test_scoring_is_pure():
    s = straight_scenario(4.0, [Obstacle((8.0, 6.0), 1.0, (0.0, -1.5))])
    plan = line(4.0)
    assert score_trajectory(s, plan) == score_trajectory(s, plan)


def test_pdms_cases():
    assert pdms(ScoreReport(1, 1, 1, 1, 1, 0)) == 1.0
    assert pdms(ScoreReport(0, 1, 1, 1, 1, 0)) == 0.0
    value = pdms(ScoreReport(1, 1, 1, 1, 0.5, 0), CompositeWeights(5, 2, 5))
    assert abs(value - 9.5 / 12.0) < 1e-15
    assert abs(value - 0.7917) < 1e-4
    with pytest.raises(ValueError):
        CompositeWeights(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        CompositeWeights(-1.0, 2.0, 5.0)


unit = st.floats(0.0, 1.0)
binary = st.sampled_from([0.0, 1.0])


@settings(deadline=None, max_examples=60)
@given(binary, binary, binary, binary, unit, unit,
       st.sampled_from(['ttc', 'comf', 'ep']))
def test_pdms_bounded_and_monotone(nc, dac, ttc, comf, ep, raised, field):
    r = ScoreReport(nc, dac, ttc, comf, ep, 0.0)
    value = pdms(r)
    assert 0.0 <= value <= 1.0
    better = dict(ttc=ttc, comf=comf, ep=ep)
    better[field] = max(better[field], raised)
    assert pdms(ScoreReport(nc, dac, better['ttc'], better['comf'], better['ep'], 0.0)) \
        >= value


def test_best_of_k_single():
    s = straight_scenario(5.0)
    out = best_of_k(lambda s, k: s.expert, s, 1)
    assert out.best == 1.0
    assert out.std == 0.0
    assert len(out.scores) == 1


def test_best_of_k_deterministic_sampler():
    s = straight_scenario(2.5, cruise=5.0)
    out = best_of_k(lambda s, k: line(2.5), s, 5)
    assert out.std == 0.0
    assert len(set(out.scores)) == 1


def test_best_of_k_superset():
    s = straight_scenario(5.0)
    speeds = [1.0, 3.0, 2.0, 5.0, 4.0, 1.5, 2.5, 4.5, 3.5, 0.5]

    def sample(s, k):
        return line(speeds[k])

    bests = [best_of_k(sample, s, k).best for k in (1, 3, 5, 10)]
    assert bests == sorted(bests)
    assert best_of_k(sample, s, 10).std > 0
    with pytest.raises(ValueError):
        best_of_k(sample, s, 0)


def test_best_of_k_curve():
    scores = [[0.1, 0.5, 0.3], [0.2, 0.1, 0.9]]
    assert np.allclose(best_of_k_curve(scores, (1, 2, 3)), [0.15, 0.35, 0.7])
    rng = np.random.default_rng(0)
    curve = best_of_k_curve(rng.uniform(size=(100, 10)), (1, 3, 5, 10))
    assert curve == sorted(curve)
    with pytest.raises(ValueError):
        best_of_k_curve(scores, (4,))


def test_constant_velocity_plan():
    s = straight_scenario(5.0)
    plan = constant_velocity_plan(s)
    assert np.allclose(plan.points, s.expert.points, atol=1e-9)


def test_mean_report():
    assert mean_report([]) == dict.fromkeys(('nc', 'dac', 'ttc', 'comf', 'ep', 'pdms'), 0.0)
    a = ScoreReport(1, 1, 1, 1, 1, 1)
    b = ScoreReport(0, 1, 0, 1, 0.5, 0)
    mean = mean_report([a, b])
    assert mean['nc'] == 0.5
    assert mean['ep'] == 0.75


def test_score_table(tmp_path):
    path = tmp_path / 'scores.csv'
    rows = [(3, ScoreReport(1, 1, 1, 1, 1, 1)), (9, ScoreReport(0, 1, 0, 1, 0.5, 0))]
    write_score_table(str(path), rows)
    with open(path, newline='') as fd:
        table = list(csv.reader(fd))
    assert table[0] == ['scenario', 'nc', 'dac', 'ttc', 'comf', 'ep', 'pdms']
    assert table[1][0] == '3'
    assert table[-1][0] == 'mean'
    assert float(table[-1][5]) == 0.75
    assert len(table) == 4
