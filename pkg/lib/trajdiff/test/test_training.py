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
import math
import os

import numpy as np
import pytest

from trajdiff import tensorcore as tc
from trajdiff.diffusion import diffusion_loss, make_schedule
from trajdiff.driver import training
from trajdiff.driver.checkpoint import load_checkpoint
from trajdiff.driver.dataset import Dataset, make_dataset
from trajdiff.driver.training import (AdamW, StepLosses, build_training_set,
                                      combine_losses, cosine_lr, train, training_step)
from trajdiff.errors import GridError, TrainingDivergedError
from trajdiff.heatmap import gaussian_focal_loss
from trajdiff.model import TrajDiffModel
from trajdiff.nn import Parameter


def test_loss_combination():
    assert abs(combine_losses(0.01083, 0.25, 200.0, 10.0) - 4.666) < 1e-12
    assert combine_losses(0.5, 0.25, 0.0, 10.0) == 2.5


def test_oracle_losses_vanish():
    rng = np.random.default_rng(0)
    gt = np.zeros((2, 8, 8))
    gt[:, 3, 4] = 1.0
    eps = rng.standard_normal((2, 8, 3))
    total = combine_losses(gaussian_focal_loss(gt, gt), diffusion_loss(eps, eps),
                           200.0, 10.0)
    assert total.item() <= 1e-4


def test_adamw_first_step():
    p = Parameter(np.array([1.0]))
    opt = AdamW([('p', p)], lr=0.1, weight_decay=1e-4)
    p.grad = np.array([2.0])
    opt.step()
    expected = 1.0 - 0.1 * (2.0 / (2.0 + 1e-8) + 1e-4)
    assert abs(p.data[0] - expected) < 1e-12
    assert opt.step_count == 1
    assert list(opt.state_tensors()) == ['adam_m/p', 'adam_v/p']


def test_adamw_clips_and_skips():
    a = Parameter(np.array([3.0, 4.0]))
    b = Parameter(np.array([1.0]))
    opt = AdamW([('a', a), ('b', b)], lr=0.1, grad_clip=1.0)
    a.grad = np.array([3.0, 4.0])
    assert opt.grad_norm() == 5.0
    opt.step()
    assert np.allclose(opt.m['a'], 0.1 * np.array([0.6, 0.8]))
    assert b.data[0] == 1.0


def test_cosine_lr():
    assert cosine_lr(1.0, 0, 10) == 1.0
    assert abs(cosine_lr(1.0, 5, 10) - 0.5) < 1e-15
    assert abs(cosine_lr(1.0, 10, 10)) < 1e-15
    assert cosine_lr(1.0, 5, 10, cosine=False) == 1.0


def test_training_set(tiny_cfg, tiny_data):
    data = build_training_set(tiny_data.scenarios, tiny_cfg)
    assert len(data) == 6
    assert data.rasters.shape == (6, 16, 16, 4)
    assert data.ego.shape == (6, 7)
    assert data.targets.shape == (6, 16, 16)
    assert data.x0.shape == (6, 8, 3)
    assert np.allclose(data.x0.reshape(-1, 3).mean(axis=0), 0.0, atol=1e-9)
    assert np.all(data.targets.max(axis=(1, 2)) == 1.0)
    sub = data.batch(np.array([0, 2]))
    assert len(sub) == 2
    assert np.array_equal(sub.x0[1], data.x0[2])


def test_noise_injection_fraction(tiny_cfg, tiny_data):
    clean = build_training_set(tiny_data.scenarios, tiny_cfg)
    noisy = build_training_set(tiny_data.scenarios,
                               tiny_cfg.replace(noise_sigma=1.0, noise_fraction=0.5),
                               normalizer=clean.normalizer)
    changed = np.any(noisy.x0 != clean.x0, axis=(1, 2))
    assert changed.sum() == 3


def _step_setup(cfg, tiny_data):
    with tc.default_dtype(cfg.np_dtype):
        model = TrajDiffModel(cfg.model_dims(), cfg.ablation_flags(),
                              np.random.default_rng(0))
    data = build_training_set(tiny_data.scenarios, cfg)
    opt = AdamW(model.named_parameters(), cfg.lr)
    return model, data.batch(np.arange(4)), opt, make_schedule(cfg.T)


def test_step_loss_decomposition(tiny_cfg, tiny_data):
    model, batch, opt, sched = _step_setup(tiny_cfg, tiny_data)
    before = model.tbdit.head.weight.numpy().copy()
    with tc.default_dtype(tiny_cfg.np_dtype):
        out = training_step(model, opt, batch, tiny_cfg, sched, np.random.default_rng(1))
    assert out.accepted
    assert out.l_final - (tiny_cfg.w_bev * out.l_bev + tiny_cfg.w_diff * out.l_diff) == 0.0
    assert out.l_bev > 0 and out.l_diff > 0
    assert not np.array_equal(model.tbdit.head.weight.numpy(), before)


def test_step_without_trajbev(tiny_cfg, tiny_data):
    cfg = tiny_cfg.replace(trajbev=False)
    model, batch, opt, sched = _step_setup(cfg, tiny_data)
    head = model.encoder.decoder.head.weight.numpy().copy()
    with tc.default_dtype(cfg.np_dtype):
        out = training_step(model, opt, batch, cfg, sched, np.random.default_rng(1))
    assert out.l_final == cfg.w_diff * out.l_diff
    assert out.l_bev > 0
    assert np.array_equal(model.encoder.decoder.head.weight.numpy(), head)


def test_non_finite_step_is_rejected(tiny_cfg, tiny_data):
    model, batch, opt, sched = _step_setup(tiny_cfg, tiny_data)
    w = model.tbdit.head.weight
    w.data = np.full(w.shape, np.nan, dtype=w.dtype)
    other = model.tbdit.traj_in.weight.numpy().copy()
    with tc.default_dtype(tiny_cfg.np_dtype):
        out = training_step(model, opt, batch, tiny_cfg, sched, np.random.default_rng(1))
    assert not out.accepted
    assert not math.isfinite(out.l_final)
    assert opt.step_count == 0
    assert np.array_equal(model.tbdit.traj_in.weight.numpy(), other)


def test_divergence_halts_training(tiny_cfg, tiny_data, monkeypatch):
    nan = float('nan')
    monkeypatch.setattr(training, 'training_step',
                        lambda *args, **kw: StepLosses(nan, nan, nan, False))
    with pytest.raises(TrainingDivergedError):
        train(tiny_cfg.replace(batch_size=2), tiny_data)


def test_smoke_run_writes_outputs(tiny_cfg, tiny_data, tmp_path):
    out = tmp_path / 'run'
    result = train(tiny_cfg.replace(epochs=2), tiny_data, out_dir=str(out))
    assert len(result.history) == 2
    ckpt = load_checkpoint(os.path.join(str(out), training.CHECKPOINT_NAME))
    assert ckpt.epoch == 2
    assert ckpt.optimizer_step == 4
    model = TrajDiffModel(result.model.dims, result.model.flags)
    model.load_state_dict(ckpt.params())
    with open(os.path.join(str(out), training.METRICS_NAME), newline='') as fd:
        rows = list(csv.DictReader(fd))
    assert [int(r['epoch']) for r in rows] == [1, 2]
    assert all(math.isfinite(float(r['l_diff'])) for r in rows)


def test_training_is_deterministic(tiny_cfg, tiny_data, tiny_run):
    again = train(tiny_cfg.replace(epochs=2), tiny_data)
    assert again.history == tiny_run.history
    a, b = tiny_run.model.state_dict(), again.model.state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_resume_reproduces_the_next_epoch(tiny_cfg, tiny_data, tiny_run, tmp_path,
                                          monkeypatch):
    saved = []
    original = training.save_checkpoint

    def keep(ckpt, path):
        saved.append(ckpt)
        original(ckpt, path)

    monkeypatch.setattr(training, 'save_checkpoint', keep)
    train(tiny_cfg.replace(epochs=2), tiny_data, out_dir=str(tmp_path))
    assert [c.epoch for c in saved] == [1, 2]
    resumed = train(tiny_cfg, tiny_data, resume=saved[0])
    assert resumed.history == tiny_run.history[1:]
    a, b = tiny_run.model.state_dict(), resumed.model.state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_grid_mismatch_rejected(tiny_cfg):
    other = make_dataset(0, 1)
    with pytest.raises(GridError):
        train(tiny_cfg, other)
    with pytest.raises(ValueError):
        train(tiny_cfg, Dataset([], tiny_cfg.world_params()))


def test_horizon_mismatch_rejected(tiny_cfg, tiny_data):
    with pytest.raises(GridError):
        train(tiny_cfg.replace(horizon_points=6), tiny_data)


@pytest.mark.slow
def test_diffusion_loss_decreases(tiny_cfg):
    cfg = tiny_cfg.replace(epochs=30, batch_size=8, width=16, blocks=2)
    data = make_dataset(0, 24, cfg.world_params())
    history = train(cfg, data).history
    first = np.mean([h['l_diff'] for h in history[:3]])
    last = np.mean([h['l_diff'] for h in history[-3:]])
    assert last < first
