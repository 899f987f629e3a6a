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
PDM-style open-loop scoring of planned trajectories.

A plan is scored against its scenario with five sub-metrics: no
collision (NC), drivable-area compliance (DAC), time to collision (TTC),
comfort (Comf) and ego progress (EP).  NC and DAC gate the composite
multiplicatively; TTC, Comf and EP enter a weighted average.
"""

import csv
import dataclasses
import logging

import numpy as np

from .errors import ShapeError, TrajDiffError
from .heatmap import cell_index
from .world import Trajectory, project_to_route, route_distance

__all__ = ['ScoringConfig', 'CompositeWeights', 'ScoreReport',
           'score_trajectory', 'pdms', 'best_of_k', 'BestOfK',
           'best_of_k_curve', 'constant_velocity_plan', 'write_score_table',
           'mean_report']

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class CompositeWeights:
    w_ttc: float = 5.0
    w_comf: float = 2.0
    w_ep: float = 5.0

    def __post_init__(self):
        values = (self.w_ttc, self.w_comf, self.w_ep)
        if any(w < 0 for w in values) or not sum(values) > 0:
            raise ValueError('composite weights must be nonnegative with a '
                             'positive sum, got %r' % (values,))


@dataclasses.dataclass(frozen=True)
class ScoringConfig:

    ego_radius: float = 1.0  # [m]
    interp_hz: float = 10.0  # [Hz] (nc, dac)
    ttc_horizon: float = 1.0  # [s] (ttc)
    ttc_step: float = 0.1  # [s] (ttc)
    max_accel: float = 3.0  # [m/s^2] (comfort)
    max_jerk: float = 10.0  # [m/s^3] (comfort)
    min_expert_progress: float = 0.5  # [m] (progress)
    weights: CompositeWeights = CompositeWeights()


@dataclasses.dataclass(frozen=True)
class ScoreReport:
    """Sub-metrics and composite of one plan.

    *dac_fraction* keeps the share of interpolated poses on the drivable
    area; *dac* is 1 only when that share is 1.  *valid* is false for plans
    that could not be scored (non-finite or in the wrong frame).
    """

    nc: float
    dac: float
    ttc: float
    comf: float
    ep: float
    pdms: float
    dac_fraction: float = 0.0
    valid: bool = True

    def as_row(self):
        return [self.nc, self.dac, self.ttc, self.comf, self.ep, self.pdms]


INVALID = ScoreReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, False)


def pdms(report, weights=None):
    """
    Composite score
    ``nc * dac * (w_ttc ttc + w_comf comf + w_ep ep) / (w_ttc + w_comf + w_ep)``.
    """
    w = CompositeWeights() if weights is None else weights
    total = w.w_ttc + w.w_comf + w.w_ep
    if not total > 0:
        raise ValueError('composite weights sum to zero')
    weighted = w.w_ttc * report.ttc + w.w_comf * report.comf + w.w_ep * report.ep
    return float(report.nc * report.dac * weighted / total)


def _interpolate(points, dt, hz):
    knots = dt * np.arange(len(points))
    times = np.arange(0.0, knots[-1] + 1e-9, 1.0 / hz)
    xy = np.stack([np.interp(times, knots, points[:, 0]),
                   np.interp(times, knots, points[:, 1])], axis=1)
    return times, xy


def _collides(ego_xy, obstacle_xy, radii, ego_radius):
    if len(radii) == 0:
        return False
    d = np.hypot(*(obstacle_xy - ego_xy[None]).transpose(2, 0, 1))
    return bool(np.any(d < radii[:, None] + ego_radius))


def _on_drivable(s, xy):
    idx, inside = cell_index(xy, s.meta)
    on_grid = s.drivable[idx[:, 0], idx[:, 1]]
    off_grid = route_distance(xy, s.route) <= s.road_half_width
    return np.where(inside, on_grid, off_grid)


def _progress(s, xy_final):
    s0 = project_to_route(np.zeros(2), s.route)
    return float(project_to_route(xy_final, s.route) - s0)


def score_trajectory(s, traj, config=None):
    """
    Score a planned trajectory in the scenario's ego frame.

    **Parameters:**

    - *s*: `trajdiff.world.Scenario`.

    - *traj*: `trajdiff.world.Trajectory` or an array ``(T_f, 3)``; must
      match the expert's waypoint count and spacing.

    - *config*: `ScoringConfig`.

    **Returns:** `ScoreReport`.  Unscorable plans get an all-zero report
    with ``valid`` false.
    """
    config = ScoringConfig() if config is None else config
    try:
        traj = traj if isinstance(traj, Trajectory) else Trajectory(traj, s.expert.dt)
    except TrajDiffError:
        log.warning('scenario %d: unscorable trajectory', s.seed)
        return INVALID
    if len(traj) != len(s.expert) or abs(traj.dt - s.expert.dt) > 1e-12:
        log.warning('scenario %d: trajectory frame (%d x %gs) does not match '
                    'the expert (%d x %gs)', s.seed, len(traj), traj.dt,
                    len(s.expert), s.expert.dt)
        return INVALID
    dt = traj.dt
    points = np.vstack([np.zeros((1, 2)), traj.xy])

    times, xy = _interpolate(points, dt, config.interp_hz)
    centers, radii = s.obstacle_positions(times)
    nc = 0.0 if _collides(xy, centers, radii, config.ego_radius) else 1.0

    dac_fraction = float(np.mean(_on_drivable(s, xy)))
    dac = 1.0 if dac_fraction == 1.0 else 0.0

    velocity = np.vstack([np.asarray(s.ego0.velocity)[None],
                          np.diff(points, axis=0) / dt])
    ttc = 1.0
    taus = np.arange(config.ttc_step, config.ttc_horizon + 1e-9, config.ttc_step)
    for i, (p, v) in enumerate(zip(points, velocity)):
        ego = p[None] + taus[:, None] * v[None]
        obs, _ = s.obstacle_positions(i * dt + taus)
        if _collides(ego, obs, radii, config.ego_radius):
            ttc = 0.0
            break

    accel = np.diff(velocity, axis=0) / dt
    jerk = np.diff(accel, axis=0) / dt
    max_a = float(np.max(np.hypot(*accel.T))) if len(accel) else 0.0
    max_j = float(np.max(np.hypot(*jerk.T))) if len(jerk) else 0.0
    comf = 1.0 if max_a <= config.max_accel and max_j <= config.max_jerk else 0.0

    expert_progress = _progress(s, s.expert.xy[-1])
    if expert_progress < config.min_expert_progress:
        ep = 1.0
    else:
        ep = float(np.clip(_progress(s, traj.xy[-1]) / expert_progress, 0.0, 1.0))

    partial = ScoreReport(nc, dac, ttc, comf, ep, 0.0, dac_fraction)
    return dataclasses.replace(partial, pdms=pdms(partial, config.weights))


@dataclasses.dataclass(frozen=True)
class BestOfK:
    best: float
    std: float
    scores: tuple


def best_of_k(sample, s, K, config=None):
    """
    Best-of-K protocol.

    **Parameters:**

    - *sample*: Callable ``(scenario, k) -> Trajectory`` returning rollout
      *k*.  Rollouts must be reproducible per index, so that the draws for
      ``K`` are a subset of the draws for any larger ``K``.

    - *s*: Scenario.

    - *K*: Number of rollouts, at least 1.

    **Returns:** `BestOfK` with the maximum PDMS, the population standard
    deviation of the K PDMS values, and the values themselves.
    """
    if int(K) != K or K < 1:
        raise ValueError('K must be a positive integer, got %r' % K)
    scores = np.array([score_trajectory(s, sample(s, k), config).pdms
                       for k in range(int(K))])
    return BestOfK(float(scores.max()), float(scores.std()), tuple(scores))


def best_of_k_curve(scores, ks):
    """Mean over scenarios of the best score among the first k rollouts,
    for each k in *ks*.  *scores* is ``(n_scenarios, K_max)``."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ShapeError('best_of_k_curve', scores.shape,
                         detail='expected (scenarios, rollouts)')
    out = []
    for k in ks:
        if not 1 <= k <= scores.shape[1]:
            raise ValueError('k=%r outside [1, %d]' % (k, scores.shape[1]))
        out.append(float(scores[:, :k].max(axis=1).mean()))
    return out


def constant_velocity_plan(s, points=None, dt=None):
    """Baseline plan: keep the current velocity vector for the horizon."""
    points = len(s.expert) if points is None else points
    dt = s.expert.dt if dt is None else dt
    v = np.asarray(s.ego0.velocity)
    t = dt * np.arange(1, points + 1)
    heading = np.arctan2(v[1], v[0]) if np.any(v) else 0.0
    pts = np.column_stack([t * v[0], t * v[1], np.full(points, heading)])
    return Trajectory(pts, dt)


def mean_report(reports):
    """Field-wise mean of several reports, as a dict."""
    fields = ('nc', 'dac', 'ttc', 'comf', 'ep', 'pdms')
    if not reports:
        return dict.fromkeys(fields, 0.0)
    return {f: float(np.mean([getattr(r, f) for r in reports])) for f in fields}


def write_score_table(path, rows):
    """
    Write per-scenario scores as CSV.

    *rows* is a sequence of ``(scenario_id, ScoreReport)``.  The last line
    is a ``mean`` footer over all rows.
    """
    rows = list(rows)
    with open(path, 'w', newline='') as fd:
        writer = csv.writer(fd)
        writer.writerow(['scenario', 'nc', 'dac', 'ttc', 'comf', 'ep', 'pdms'])
        for sid, report in rows:
            writer.writerow([sid] + ['%.6f' % v for v in report.as_row()])
        mean = mean_report([r for _, r in rows])
        writer.writerow(['mean'] + ['%.6f' % mean[f] for f in
                                    ('nc', 'dac', 'ttc', 'comf', 'ep', 'pdms')])
    log.info('wrote %d scores to %s', len(rows), path)
