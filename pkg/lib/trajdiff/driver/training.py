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
Training: sample preparation, the AdamW optimizer, the training step and
the epoch loop with checkpointing and resume.
"""

import collections
import csv
import dataclasses
import logging
import math
import os

import numpy as np
from tqdm import tqdm

from .. import tensorcore as tc
from ..diffusion import (TrajectoryNormalizer, diffusion_loss, forward_noise,
                         make_schedule)
from ..errors import GridError, TrainingDivergedError
from ..heatmap import gaussian_bev_target, gaussian_focal_loss, waypoint_speeds
from ..model import TrajDiffModel
from ..world import (inject_noise, noisy_indices, rasterize_scenario,
                     resample_scenario)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import config_from_dict

__all__ = ['AdamW', 'TrainingSet', 'StepLosses', 'TrainResult',
           'build_training_set', 'training_step', 'combine_losses', 'train',
           'cosine_lr', 'CHECKPOINT_NAME', 'METRICS_NAME']

log = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.tdc'
METRICS_NAME = 'metrics.csv'
MAX_REJECTED_STEPS = 3


class AdamW:
    """Adam with decoupled weight decay and optional global-norm clipping."""

    def __init__(self, named_params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=1e-4, grad_clip=0.0):
        self.params = collections.OrderedDict(named_params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.step_count = 0
        self.m = collections.OrderedDict(
            (k, np.zeros_like(p.data)) for k, p in self.params.items())
        self.v = collections.OrderedDict(
            (k, np.zeros_like(p.data)) for k, p in self.params.items())

    def grad_norm(self):
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float(np.sum(np.square(p.grad, dtype=np.float64)))
        return math.sqrt(total)

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        scale = 1.0
        if self.grad_clip > 0:
            norm = self.grad_norm()
            if norm > self.grad_clip:
                scale = self.grad_clip / norm
        self.step_count += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad * scale
            m = self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps) + self.weight_decay * p.data
            p.data = (p.data - lr * update).astype(p.dtype, copy=False)

    def state_tensors(self):
        out = collections.OrderedDict()
        for name in self.params:
            out['adam_m/' + name] = self.m[name]
        for name in self.params:
            out['adam_v/' + name] = self.v[name]
        return out

    def load_state(self, step, m, v):
        for name, p in self.params.items():
            self.m[name] = np.array(m[name], dtype=p.dtype)
            self.v[name] = np.array(v[name], dtype=p.dtype)
        self.step_count = int(step)


def cosine_lr(base, step, total, cosine=True):
    if not cosine or total <= 0:
        return base
    return base * 0.5 * (1.0 + math.cos(math.pi * min(step, total) / total))


@dataclasses.dataclass(eq=False)
class TrainingSet:
    """Stacked per-sample arrays: rasters ``(N, H, W, 4)``, ego features
    ``(N, 7)``, heatmap targets ``(N, H, W)`` and normalized expert
    trajectories ``(N, T_f, 3)``."""

    rasters: np.ndarray
    ego: np.ndarray
    targets: np.ndarray
    x0: np.ndarray
    normalizer: TrajectoryNormalizer

    def __len__(self):
        return len(self.x0)

    def batch(self, idx):
        return TrainingSet(self.rasters[idx], self.ego[idx], self.targets[idx],
                           self.x0[idx], self.normalizer)


def build_training_set(scenarios, cfg, params=None, rng=None, normalizer=None):
    """
    Expand scenarios into training samples.

    Each scenario contributes itself plus one resampled copy per entry of
    ``cfg.resample_offsets``.  Then ``cfg.noise_fraction`` of the samples
    get Gaussian noise of ``cfg.noise_sigma`` on their expert positions.
    The normalizer is fit on the resulting expert trajectories unless one
    is given.
    """
    params = cfg.world_params() if params is None else params
    rng = np.random.default_rng([cfg.seed, 1]) if rng is None else rng
    samples = []
    for s in scenarios:
        samples.append(s)
        for frac in cfg.resample_offsets:
            samples.append(resample_scenario(s, frac * cfg.dt, params))
    experts = [s.expert for s in samples]
    if cfg.noise_sigma > 0:
        for i in noisy_indices(len(samples), cfg.noise_fraction, rng):
            experts[i] = inject_noise(experts[i], cfg.noise_sigma, rng)
    policy = cfg.radius_policy()
    meta = cfg.grid_meta()
    rasters = np.stack([rasterize_scenario(s) for s in samples])
    ego = np.stack([s.ego0.features() for s in samples])
    targets = np.stack([
        gaussian_bev_target(e, waypoint_speeds(e, e.dt), policy, meta,
                            snap=cfg.heatmap_snap).values
        for e in experts])
    raw = np.stack([e.points for e in experts])
    if normalizer is None:
        normalizer = TrajectoryNormalizer.fit(raw)
    log.info('built %d training samples from %d scenarios', len(samples), len(scenarios))
    return TrainingSet(rasters, ego, targets, normalizer.normalize(raw), normalizer)


@dataclasses.dataclass(frozen=True)
class StepLosses:
    l_bev: float
    l_diff: float
    l_final: float
    accepted: bool = True


def combine_losses(l_bev, l_diff, w_bev, w_diff):
    """``w_bev * l_bev + w_diff * l_diff``; works on floats and tensors."""
    return l_bev * w_bev + l_diff * w_diff


def _losses(model, batch, cfg, schedule, rng):
    n = len(batch)
    t = rng.integers(1, schedule.T + 1, size=n)
    eps = rng.standard_normal(batch.x0.shape)
    x_t = forward_noise(batch.x0, t, eps, schedule).x_t
    enc = model.encode(batch.rasters, batch.ego)
    l_diff = diffusion_loss(model.predict_noise(x_t, t, enc.f_traj), eps)
    if cfg.trajbev:
        l_bev = gaussian_focal_loss(enc.heatmap, batch.targets,
                                    cfg.focal_alpha, cfg.focal_gamma)
        w_bev = cfg.w_bev
    else:
        with tc.no_grad():
            l_bev = gaussian_focal_loss(enc.heatmap.detach(), batch.targets,
                                        cfg.focal_alpha, cfg.focal_gamma)
        w_bev = 0.0
    return l_bev, l_diff, w_bev


def training_step(model, optimizer, batch, cfg, schedule, rng, lr=None):
    """
    One optimization step on a batch.

    **Parameters:**

    - *model*: `trajdiff.model.TrajDiffModel`.

    - *optimizer*: `AdamW` over the model parameters.

    - *batch*: `TrainingSet` slice.

    - *cfg*: `TrainConfig`.

    - *schedule*: `trajdiff.diffusion.NoiseSchedule`.

    - *rng*: Generator for the per-sample steps and noise draws.

    **Returns:** `StepLosses`.  When the total is not finite the update is
    skipped and ``accepted`` is false.  With the TrajBEV switch off the
    heatmap loss is reported but weighted by zero.
    """
    if len(batch) == 0:
        raise ValueError('empty batch')
    l_bev, l_diff, w_bev = _losses(model, batch, cfg, schedule, rng)
    total = combine_losses(l_bev, l_diff, w_bev, cfg.w_diff)
    values = float(l_bev.item()), float(l_diff.item())
    reported = StepLosses(values[0], values[1],
                          combine_losses(values[0], values[1], w_bev, cfg.w_diff))
    if not math.isfinite(reported.l_final):
        log.warning('non-finite loss (bev=%r, diff=%r); step rejected', *values)
        return dataclasses.replace(reported, accepted=False)
    model.zero_grad()
    total.backward()
    optimizer.step(lr)
    return reported


@dataclasses.dataclass(eq=False)
class TrainResult:
    model: TrajDiffModel
    checkpoint: Checkpoint
    history: list


def _check_grid(cfg, dataset):
    if len(dataset) == 0:
        raise ValueError('cannot train on an empty dataset')
    meta = cfg.grid_meta()
    if dataset.meta != meta:
        raise GridError('dataset grid %r does not match configured grid %r'
                        % (dataset.meta, meta))
    for s in dataset:
        if s.meta != meta:
            raise GridError('scenario %d grid %r does not match configured grid %r'
                            % (s.seed, s.meta, meta))
        if len(s.expert) != cfg.horizon_points or abs(s.expert.dt - cfg.dt) > 1e-12:
            raise GridError('scenario %d horizon (%d x %gs) does not match the '
                            'configuration (%d x %gs)' % (s.seed, len(s.expert),
                                                         s.expert.dt,
                                                         cfg.horizon_points, cfg.dt))


def make_checkpoint(model, optimizer, cfg, normalizer, rng, epoch):
    tensors = collections.OrderedDict(
        ('param/' + k, v) for k, v in model.state_dict().items())
    tensors.update(optimizer.state_tensors())
    return Checkpoint(cfg.to_dict(), tensors, normalizer.to_dict(),
                      rng.bit_generator.state, epoch, optimizer.step_count)


def _write_metrics(path, history, append):
    fields = ['epoch', 'l_bev', 'l_diff', 'l_final', 'lr', 'rejected']
    with open(path, 'a' if append else 'w', newline='') as fd:
        writer = csv.DictWriter(fd, fieldnames=fields)
        if not append:
            writer.writeheader()
        writer.writerow(history[-1])


def train(cfg, dataset, out_dir=None, resume=None):
    """
    Train a planner.

    **Parameters:**

    - *cfg*: `TrainConfig`.

    - *dataset*: `trajdiff.driver.dataset.Dataset`; its grid must match
      the configuration.

    - *out_dir*: Directory for ``checkpoint.tdc`` (rewritten after every
      epoch) and ``metrics.csv``.  Nothing is written when ``None``.

    - *resume*: `Checkpoint` or path to continue from; its configuration
      replaces *cfg*.

    **Returns:** `TrainResult` with the trained model, the final checkpoint
    and the per-epoch loss history.

    **Raises:** `GridError` on a dataset/configuration mismatch,
    `TrainingDivergedError` after three consecutive rejected steps.
    """
    if resume is not None and not isinstance(resume, Checkpoint):
        resume = load_checkpoint(resume)
    if resume is not None:
        cfg = config_from_dict(resume.config)
    _check_grid(cfg, dataset)
    with tc.default_dtype(cfg.np_dtype):
        return _train(cfg, dataset, out_dir, resume)


def _train(cfg, dataset, out_dir, resume):
    schedule = make_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    model = TrajDiffModel(cfg.model_dims(), cfg.ablation_flags(),
                          np.random.default_rng([cfg.seed, 0]))
    normalizer = None
    if resume is not None:
        normalizer = TrajectoryNormalizer.from_dict(resume.normalizer)
    data = build_training_set(dataset.scenarios, cfg, dataset.params,
                              np.random.default_rng([cfg.seed, 1]), normalizer)
    normalizer = data.normalizer
    optimizer = AdamW(model.named_parameters(), cfg.lr, (cfg.beta1, cfg.beta2),
                      weight_decay=cfg.weight_decay, grad_clip=cfg.grad_clip)
    rng = np.random.default_rng([cfg.seed, 2])
    start_epoch = 0
    if resume is not None:
        model.load_state_dict(resume.params())
        optimizer.load_state(resume.optimizer_step, resume.moments('adam_m'),
                             resume.moments('adam_v'))
        rng.bit_generator.state = resume.rng_state
        start_epoch = resume.epoch
        log.info('resuming at epoch %d (step %d)', start_epoch, resume.optimizer_step)
    log.info('training %d parameters on %d samples for %d epochs',
             model.num_parameters(), len(data), cfg.epochs)

    steps_per_epoch = int(math.ceil(len(data) / cfg.batch_size))
    total_steps = steps_per_epoch * cfg.epochs
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    history = []
    rejected_run = 0
    checkpoint = make_checkpoint(model, optimizer, cfg, normalizer, rng, start_epoch)
    for epoch in range(start_epoch, cfg.epochs):
        order = rng.permutation(len(data))
        sums = np.zeros(3)
        accepted = rejected = 0
        batches = range(steps_per_epoch)
        for b in tqdm(batches, desc='epoch %d' % (epoch + 1), leave=False,
                      disable=not cfg.progress):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            lr = cosine_lr(cfg.lr, optimizer.step_count, total_steps, cfg.cosine)
            step = training_step(model, optimizer, data.batch(idx), cfg, schedule,
                                 rng, lr)
            if step.accepted:
                rejected_run = 0
                accepted += 1
                sums += (step.l_bev, step.l_diff, step.l_final)
            else:
                rejected_run += 1
                rejected += 1
                if rejected_run >= MAX_REJECTED_STEPS:
                    raise TrainingDivergedError(
                        'training diverged: %d consecutive non-finite steps in '
                        'epoch %d' % (rejected_run, epoch + 1))
        means = sums / max(accepted, 1)
        history.append({'epoch': epoch + 1, 'l_bev': means[0], 'l_diff': means[1],
                        'l_final': means[2], 'lr': lr, 'rejected': rejected})
        log.info('epoch %d/%d: L_bev %.5f  L_diff %.5f  L_final %.5f',
                 epoch + 1, cfg.epochs, *means)
        checkpoint = make_checkpoint(model, optimizer, cfg, normalizer, rng, epoch + 1)
        if out_dir is not None:
            save_checkpoint(checkpoint, os.path.join(out_dir, CHECKPOINT_NAME))
            _write_metrics(os.path.join(out_dir, METRICS_NAME), history,
                           append=epoch > 0)
    return TrainResult(model, checkpoint, history)
