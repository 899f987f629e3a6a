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
Experiment grids: data scaling, component ablation, heatmap radius,
trajectory noise, sampling steps and best-of-K.

Every study trains one model per variant and seed on the same generated
data, scores it on a held-out set and writes one CSV row per variant and
seed plus a ``mean`` row per variant.
"""

import csv
import dataclasses
import logging

import numpy as np

from ..diffusion import TrajectoryNormalizer
from ..scoring import best_of_k_curve, mean_report
from .config import TrainConfig
from .dataset import Dataset, make_dataset
from .planning import Planner, evaluate
from .training import train

__all__ = ['StudyConfig', 'StudyData', 'make_study_data', 'train_planner',
           'run_variants', 'run_scale_study', 'run_ablation', 'run_radius_study',
           'run_noise_study', 'run_steps_study', 'run_bok_study',
           'ABLATION_VARIANTS', 'RADIUS_VARIANTS', 'NOISE_SIGMAS', 'STEP_COUNTS',
           'BOK_KS']

log = logging.getLogger(__name__)

SCORE_FIELDS = ('nc', 'dac', 'ttc', 'comf', 'ep', 'pdms')

ABLATION_VARIANTS = (
    ('baseline', dict(trajbev=False, eb_interaction=False, bev_cross=False)),
    ('no-trajbev', dict(trajbev=False)),
    ('no-eb', dict(eb_interaction=False)),
    ('no-bev-cross', dict(bev_cross=False)),
    ('full', {}),
)

RADIUS_VARIANTS = (
    ('constant-5', dict(radius_mode='constant', radius=5.0)),
    ('constant-25', dict(radius_mode='constant', radius=25.0)),
    ('velocity', dict(radius_mode='velocity')),
)

NOISE_SIGMAS = (0.0, 0.1, 1.0)
STEP_COUNTS = (3, 12, 20, 40)
BOK_KS = (1, 3, 5, 10)


@dataclasses.dataclass
class StudyConfig(TrainConfig):
    """`TrainConfig` plus the data sizes and seeds of a study."""

    train_count: int = 500
    val_count: int = 50
    extra_count: int = 100
    data_seed: int = 0
    val_seed: int = 1
    study_seeds: tuple = (0, 1, 2)

    def __post_init__(self):
        super().__post_init__()
        self.study_seeds = tuple(int(s) for s in self.study_seeds)

    def to_dict(self):
        d = super().to_dict()
        d['study_seeds'] = list(self.study_seeds)
        return d

    def training_config(self, **changes):
        """The `TrainConfig` part, with *changes* applied."""
        names = {f.name for f in dataclasses.fields(TrainConfig)}
        d = {k: v for k, v in self.to_dict().items() if k in names}
        d.update(changes)
        return TrainConfig(**d)


@dataclasses.dataclass(eq=False)
class StudyData:
    train: Dataset
    extra: Dataset
    val: Dataset

    def combined(self):
        return Dataset(self.train.scenarios + self.extra.scenarios,
                       self.train.params, self.train.master_seed)


def make_study_data(cfg, extra=False):
    """Training, extra and validation sets.  The extra scenarios continue
    the training seed sequence; the validation set has its own master seed."""
    params = cfg.world_params()
    train_set = make_dataset(cfg.data_seed, cfg.train_count, params,
                             progress=cfg.progress)
    extra_set = make_dataset(cfg.data_seed, cfg.extra_count if extra else 0, params,
                             first_index=cfg.train_count, progress=cfg.progress)
    val_set = make_dataset(cfg.val_seed, cfg.val_count, params, progress=cfg.progress)
    return StudyData(train_set, extra_set, val_set)


def train_planner(cfg, dataset):
    """Train on *dataset* and wrap the result as a `Planner`."""
    result = train(cfg, dataset)
    normalizer = TrajectoryNormalizer.from_dict(result.checkpoint.normalizer)
    return Planner(result.model, cfg, normalizer)


def _score_row(variant, seed, reports):
    return dict(variant=variant, seed=seed, **mean_report(reports))


def _write_rows(path, rows, score_fields=SCORE_FIELDS):
    fields = ['variant', 'seed'] + list(score_fields)
    table = list(rows)
    for variant in dict.fromkeys(r['variant'] for r in table):
        group = [r for r in table if r['variant'] == variant]
        mean = dict(variant=variant, seed='mean')
        for f in score_fields:
            mean[f] = float(np.mean([r[f] for r in group]))
        table.append(mean)
    if path is not None:
        with open(path, 'w', newline='') as fd:
            writer = csv.DictWriter(fd, fieldnames=fields)
            writer.writeheader()
            writer.writerows(table)
        log.info('wrote %d rows to %s', len(table), path)
    return table


def run_variants(cfg, variants, data, path=None):
    """
    Train and score each ``(name, config_changes, dataset)`` variant for
    every seed of ``cfg.study_seeds``.

    **Returns:** the table rows, including the per-variant means.
    """
    rows = []
    for name, changes, dataset in variants:
        for seed in cfg.study_seeds:
            run_cfg = cfg.training_config(seed=seed, **changes)
            log.info('study variant %s, seed %d', name, seed)
            planner = train_planner(run_cfg, dataset)
            reports = [r for _, r in evaluate(planner, data.val, seed=seed)]
            rows.append(_score_row(name, seed, reports))
    return _write_rows(path, rows)


def run_scale_study(cfg, path=None):
    """Initial-point resampling off/on crossed with extra data off/on."""
    data = make_study_data(cfg, extra=True)
    variants = []
    for extra in (False, True):
        dataset = data.combined() if extra else data.train
        for resample in (False, True):
            offsets = cfg.resample_offsets if resample else ()
            name = 'resample=%s,extra=%s' % (resample, extra)
            variants.append((name, dict(resample_offsets=offsets), dataset))
    return run_variants(cfg, variants, data, path)


def run_ablation(cfg, path=None):
    """The five settings of the component switches, from all off to the full model."""
    data = make_study_data(cfg)
    variants = [(name, changes, data.train) for name, changes in ABLATION_VARIANTS]
    return run_variants(cfg, variants, data, path)


def run_radius_study(cfg, path=None):
    data = make_study_data(cfg)
    variants = [(name, changes, data.train) for name, changes in RADIUS_VARIANTS]
    return run_variants(cfg, variants, data, path)


def run_noise_study(cfg, path=None):
    """Gaussian position noise on ``cfg.noise_fraction`` of the training
    trajectories."""
    data = make_study_data(cfg)
    variants = [('sigma=%g' % sigma, dict(noise_sigma=sigma), data.train)
                for sigma in NOISE_SIGMAS]
    return run_variants(cfg, variants, data, path)


def run_steps_study(cfg, path=None, step_counts=STEP_COUNTS):
    """One model per seed, evaluated with several DDIM step counts."""
    data = make_study_data(cfg)
    rows = []
    for seed in cfg.study_seeds:
        planner = train_planner(cfg.training_config(seed=seed), data.train)
        for steps in step_counts:
            reports = [r for _, r in evaluate(planner, data.val, steps=steps, seed=seed)]
            rows.append(_score_row('steps=%d' % steps, seed, reports))
    return _write_rows(path, rows)


def run_bok_study(cfg, path=None, ks=BOK_KS):
    """
    Best-of-K with nested draws: each validation scenario gets ``max(ks)``
    rollouts and the score for K is the best among the first K.  The row
    also reports the mean per-scenario standard deviation of the K scores.
    """
    data = make_study_data(cfg)
    k_max = max(ks)
    rows = []
    for seed in cfg.study_seeds:
        planner = train_planner(cfg.training_config(seed=seed), data.train)
        scores = np.array([planner.plan(s, k_max, seed=seed).best.scores
                           for s in data.val])
        curve = best_of_k_curve(scores, ks)
        for k, best in zip(ks, curve):
            std = float(scores[:, :k].std(axis=1).mean())
            rows.append(dict(variant='K=%d' % k, seed=seed, pdms=best, std=std))
    return _write_rows(path, rows, ('pdms', 'std'))
