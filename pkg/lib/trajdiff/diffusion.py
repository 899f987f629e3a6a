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
Gaussian diffusion over continuous trajectories.

Schedule tables are indexed by the step ``t`` in ``0..T``; index 0 is the
clean sample, so ``alpha_bar[0] == 1`` and ``beta[0] == 0``.  Trajectory
arrays have shape ``(..., T_f, 3)``; every function broadcasts over the
leading axes, with one step index per leading element when *t* is an
array.
"""

import dataclasses
import logging

import numpy as np

from . import tensorcore as tc
from .errors import ScheduleError, ShapeError

__all__ = ['NoiseSchedule', 'NoisedTrajectory', 'TrajectoryNormalizer',
           'make_schedule', 'forward_noise', 'ddpm_step', 'ddpm_sample',
           'ddim_timesteps', 'ddim_sample', 'diffusion_loss']

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """
    Variance schedule tables.

    *sigma* is the posterior standard deviation
    ``sqrt(beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t))`` used by the
    ancestral sampler.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray
    kind: str = 'linear'


@dataclasses.dataclass(eq=False)
class NoisedTrajectory:
    x_t: np.ndarray
    t: object
    eps: np.ndarray


def make_schedule(T=100, beta_start=1e-4, beta_end=2e-2, kind='linear'):
    """
    Build a noise schedule of *T* steps.

    **Parameters:**

    - *T*: Number of diffusion steps, at least 2.

    - *beta_start*, *beta_end*: ``beta_1`` and ``beta_T``, with
      ``0 < beta_start <= beta_end < 1``.

    - *kind*: Only ``'linear'`` is supported: betas evenly spaced between
      the two bounds.

    **Returns:** `NoiseSchedule`
    """
    if kind != 'linear':
        raise ScheduleError('unknown schedule kind %r' % kind)
    if int(T) != T or T < 2:
        raise ScheduleError('T must be an integer >= 2, got %r' % T)
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ScheduleError('need 0 < beta_start <= beta_end < 1, got %r, %r'
                            % (beta_start, beta_end))
    T = int(T)
    beta = np.zeros(T + 1)
    beta[1:] = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sigma = np.zeros(T + 1)
    sigma[1:] = np.sqrt(beta[1:] * (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]))
    for arr in (beta, alpha, alpha_bar, sigma):
        arr.setflags(write=False)
    return NoiseSchedule(T, beta, alpha, alpha_bar, sigma, kind)


def _steps(t, sched, lead_shape, lowest=0):
    t_arr = np.asarray(t)
    if not np.issubdtype(t_arr.dtype, np.integer):
        if np.any(t_arr != np.round(t_arr)):
            raise ScheduleError('step indices must be integers, got %r' % (t,))
        t_arr = t_arr.astype(np.int64)
    if np.any(t_arr < lowest) or np.any(t_arr > sched.T):
        raise ScheduleError('step index out of range [%d, %d]: %r'
                            % (lowest, sched.T, t))
    if t_arr.ndim and t_arr.shape != tuple(lead_shape):
        raise ShapeError('step indices', t_arr.shape, tuple(lead_shape),
                         detail='one step per leading element')
    return t_arr


def _per_sample(table, t_arr):
    values = table[t_arr]
    return values[..., None, None] if np.ndim(values) else values


def forward_noise(x0, t, eps, sched):
    """
    Corrupt clean trajectories to step *t*:
    ``x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps``.

    *t* may be a scalar or one step per leading element of *x0*; ``t = 0``
    returns *x0* unchanged.
    """
    x0 = np.asarray(getattr(x0, 'points', x0), dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ShapeError('forward_noise', x0.shape, eps.shape)
    t_arr = _steps(t, sched, x0.shape[:-2])
    ab = _per_sample(sched.alpha_bar, t_arr)
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
    return NoisedTrajectory(x_t, t, eps)


def ddpm_step(x_t, eps_hat, t, sched, delta=None):
    """
    One ancestral reverse step from *t* to ``t - 1``:

    ``x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - alpha_bar_t) eps_hat)
    / sqrt(alpha_t) + sigma_t delta``.

    *delta* defaults to zero, giving the mean of the reverse transition.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_t.shape != eps_hat.shape:
        raise ShapeError('ddpm_step', x_t.shape, eps_hat.shape)
    t_arr = _steps(t, sched, x_t.shape[:-2], lowest=1)
    a = _per_sample(sched.alpha, t_arr)
    ab = _per_sample(sched.alpha_bar, t_arr)
    out = (x_t - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a)
    if delta is not None:
        delta = np.asarray(delta, dtype=np.float64)
        if delta.shape != x_t.shape:
            raise ShapeError('ddpm_step', x_t.shape, delta.shape)
        out = out + _per_sample(sched.sigma, t_arr) * delta
    return out


def ddpm_sample(eps_model, condition, sched, x_T, rng):
    """Run the full ancestral chain from ``x_T`` down to step 0."""
    x = np.asarray(x_T, dtype=np.float64)
    for t in range(sched.T, 0, -1):
        eps_hat = np.asarray(eps_model(x, t, condition), dtype=np.float64)
        delta = rng.standard_normal(x.shape) if t > 1 else None
        x = ddpm_step(x, eps_hat, t, sched, delta)
    return x


def ddim_timesteps(T, steps):
    """Evenly strided, strictly decreasing step indices from *T* to 1."""
    if int(steps) != steps or steps < 1:
        raise ScheduleError('steps must be a positive integer, got %r' % steps)
    if steps > T:
        raise ScheduleError('steps (%d) exceeds schedule length T (%d)'
                            % (steps, T))
    # spacing >= 1, so rounding half up keeps the indices distinct
    ts = np.floor(np.linspace(T, 1, int(steps)) + 0.5).astype(np.int64)
    return ts


def _check_timesteps(ts, T):
    ts = np.asarray(ts)
    if ts.ndim != 1 or len(ts) == 0:
        raise ScheduleError('timesteps must be a nonempty 1-d sequence')
    if np.any(ts < 1) or np.any(ts > T):
        raise ScheduleError('timesteps must lie in [1, %d], got %r'
                            % (T, ts.tolist()))
    if np.any(np.diff(ts) >= 0):
        raise ScheduleError('timesteps must be strictly decreasing, got %r'
                            % ts.tolist())
    return ts.astype(np.int64)


def ddim_sample(eps_model, condition, sched, steps=20, x_T=None,
                timesteps=None):
    """
    Deterministic strided sampler (eta = 0).

    **Parameters:**

    - *eps_model*: Callable ``(x_t, t, condition) -> eps_hat`` returning an
      array shaped like *x_t*.

    - *condition*: Passed through to *eps_model* unchanged.

    - *sched*: `NoiseSchedule`.

    - *steps*: Number of model evaluations, at most ``sched.T``.

    - *x_T*: Initial Gaussian draw, shape ``(..., T_f, 3)``.

    - *timesteps*: Explicit strictly decreasing step indices; overrides
      *steps*.

    **Returns:** The clean-sample estimate ``x0_hat`` from the last step.
    """
    if x_T is None:
        raise ValueError('ddim_sample needs an initial draw x_T')
    if timesteps is None:
        ts = ddim_timesteps(sched.T, steps)
    else:
        ts = _check_timesteps(timesteps, sched.T)
    x = np.asarray(x_T, dtype=np.float64)
    x0_hat = x
    for i, t in enumerate(ts):
        eps_hat = np.asarray(eps_model(x, int(t), condition), dtype=np.float64)
        ab = sched.alpha_bar[t]
        x0_hat = (x - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)
        if i + 1 < len(ts):
            ab_next = sched.alpha_bar[ts[i + 1]]
            x = np.sqrt(ab_next) * x0_hat + np.sqrt(1.0 - ab_next) * eps_hat
    return x0_hat


@dataclasses.dataclass(eq=False)
class TrajectoryNormalizer:
    """Per-coordinate affine scaling of ``(x, y, theta)`` waypoints."""

    mean: np.ndarray
    std: np.ndarray

    MIN_STD = 1e-3

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(3)
        self.std = np.asarray(self.std, dtype=np.float64).reshape(3)
        if np.any(self.std <= 0):
            raise ValueError('normalizer std must be positive')

    @classmethod
    def identity(cls):
        return cls(np.zeros(3), np.ones(3))

    @classmethod
    def fit(cls, trajectories):
        data = np.asarray(trajectories, dtype=np.float64).reshape(-1, 3)
        return cls(data.mean(axis=0),
                   np.maximum(data.std(axis=0), cls.MIN_STD))

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, x):
        return np.asarray(x, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {'mean': self.mean.tolist(), 'std': self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d['mean'], d['std'])


def diffusion_loss(eps_hat, eps):
    """Mean squared error between predicted and true noise."""
    eps_hat = tc.as_tensor(eps_hat)
    eps = np.asarray(eps)
    if eps_hat.shape != eps.shape:
        raise ShapeError('diffusion_loss', eps_hat.shape, eps.shape)
    diff = eps_hat - eps
    return tc.mean(diff * diff)
