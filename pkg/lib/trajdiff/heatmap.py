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
Bird's-eye-view grids and the Gaussian driving-pattern heatmap.

The grid is indexed ``[ix, iy]``: *ix* runs along world x (forward, the
grid height) and *iy* along world y (left, the grid width).  Cell
``(0, 0)`` is centered on `GridMeta.origin`.

The heatmap target places one Gaussian on every future waypoint and takes
the per-cell maximum.  Each Gaussian's width follows the ego speed at that
waypoint, so fast segments paint wide ridges and slow ones narrow peaks.
"""

import dataclasses
import logging

import numpy as np

from . import tensorcore as tc
from .errors import GridError, ShapeError, TrajectoryError

__all__ = ['GridMeta', 'HeatmapTarget', 'RadiusPolicy', 'world_to_grid',
           'grid_to_world', 'cell_index', 'waypoint_speeds',
           'gaussian_bev_target', 'gaussian_focal_loss', 'write_pgm',
           'read_pgm', 'POSITIVE_TOLERANCE']

log = logging.getLogger(__name__)

# Target values at or above 1 - POSITIVE_TOLERANCE take the positive branch
# of the focal loss.
POSITIVE_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class GridMeta:
    """Geometry of a BEV grid.

    *origin* is the world ``(x, y)`` of the center of cell ``(0, 0)``.
    """

    height: int = 32
    width: int = 32
    resolution: float = 1.0
    origin: tuple = (-7.5, -15.5)

    def __post_init__(self):
        if int(self.height) < 8 or int(self.width) < 8:
            raise GridError('grid must be at least 8x8 cells, got %dx%d'
                            % (self.height, self.width))
        if not self.resolution > 0:
            raise GridError('resolution must be positive, got %r'
                            % self.resolution)
        object.__setattr__(self, 'height', int(self.height))
        object.__setattr__(self, 'width', int(self.width))
        object.__setattr__(self, 'resolution', float(self.resolution))
        object.__setattr__(self, 'origin',
                           (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def extent(self):
        """World bounds ``(xmin, xmax, ymin, ymax)`` of the cell edges."""
        half = 0.5 * self.resolution
        x0, y0 = self.origin
        return (x0 - half, x0 + (self.height - 0.5) * self.resolution,
                y0 - half, y0 + (self.width - 0.5) * self.resolution)

    def cell_centers(self):
        """World coordinates of every cell center, shape ``(H, W, 2)``."""
        xs = self.origin[0] + np.arange(self.height) * self.resolution
        ys = self.origin[1] + np.arange(self.width) * self.resolution
        gx, gy = np.meshgrid(xs, ys, indexing='ij')
        return np.stack([gx, gy], axis=-1)

    def to_dict(self):
        return {'height': self.height, 'width': self.width,
                'resolution': self.resolution, 'origin': list(self.origin)}

    @classmethod
    def from_dict(cls, d):
        return cls(d['height'], d['width'], d['resolution'], tuple(d['origin']))


def world_to_grid(points, meta):
    """
    Map world points to fractional cell coordinates.

    **Parameters:**

    - *points*: Array ``(..., 2)`` of world ``(x, y)`` in meters.

    - *meta*: `GridMeta`.

    **Returns:** ``(coords, inside)``: fractional ``(ix, iy)`` of the same
    shape as *points*, unclamped, and a boolean array flagging the points
    whose nearest cell lies on the grid.
    """
    points = np.asarray(points, dtype=np.float64)
    coords = (points - np.asarray(meta.origin)) / meta.resolution
    nearest = np.floor(coords + 0.5)
    inside = ((nearest[..., 0] >= 0) & (nearest[..., 0] < meta.height)
              & (nearest[..., 1] >= 0) & (nearest[..., 1] < meta.width))
    return coords, inside


def grid_to_world(coords, meta):
    coords = np.asarray(coords, dtype=np.float64)
    return np.asarray(meta.origin) + coords * meta.resolution


def cell_index(points, meta):
    """Integer cell indices ``(..., 2)`` of the cells containing *points*,
    clamped to the grid, plus the on-grid mask."""
    coords, inside = world_to_grid(points, meta)
    idx = np.floor(coords + 0.5).astype(np.int64)
    idx[..., 0] = np.clip(idx[..., 0], 0, meta.height - 1)
    idx[..., 1] = np.clip(idx[..., 1], 0, meta.width - 1)
    return idx, inside


@dataclasses.dataclass(frozen=True)
class RadiusPolicy:
    """How wide each waypoint's Gaussian is.

    In ``'velocity'`` mode ``sigma_i = max(gamma * v_i, sigma_min)``; in
    ``'constant'`` mode every waypoint uses *radius*.
    """

    mode: str = 'velocity'
    radius: float = 5.0
    gamma: float = 0.4
    sigma_min: float = 0.5

    def __post_init__(self):
        if self.mode not in ('velocity', 'constant'):
            raise ValueError("radius mode must be 'velocity' or 'constant', "
                             "got %r" % self.mode)
        for name in ('radius', 'gamma', 'sigma_min'):
            if not getattr(self, name) > 0:
                raise ValueError('%s must be positive, got %r'
                                 % (name, getattr(self, name)))

    @classmethod
    def constant(cls, radius):
        return cls(mode='constant', radius=radius)

    @classmethod
    def velocity(cls, gamma=0.4, sigma_min=0.5):
        return cls(mode='velocity', gamma=gamma, sigma_min=sigma_min)

    def sigmas(self, speeds):
        speeds = np.asarray(speeds, dtype=np.float64)
        if self.mode == 'constant':
            return np.full(speeds.shape, float(self.radius))
        return np.maximum(self.gamma * speeds, self.sigma_min)


@dataclasses.dataclass(eq=False)
class HeatmapTarget:
    values: np.ndarray
    meta: GridMeta

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.meta.shape:
            raise ShapeError('heatmap', self.values.shape, self.meta.shape)

    def positives(self):
        return self.values >= 1.0 - POSITIVE_TOLERANCE


def _waypoint_xy(traj):
    points = np.asarray(getattr(traj, 'points', traj), dtype=np.float64)
    if points.ndim != 2 or points.shape[-1] < 2:
        raise ShapeError('trajectory', points.shape,
                         detail='expected (T_f, 2) or (T_f, 3)')
    if len(points) == 0:
        raise TrajectoryError('trajectory has no waypoints')
    if not np.all(np.isfinite(points)):
        raise TrajectoryError('trajectory has non-finite waypoints')
    return points[:, :2]


def waypoint_speeds(traj, dt, start=(0.0, 0.0)):
    """Finite-difference speeds ``|p_i - p_{i-1}| / dt`` with ``p_0 = start``."""
    xy = _waypoint_xy(traj)
    prev = np.vstack([np.asarray(start, dtype=np.float64)[None, :], xy[:-1]])
    return np.hypot(*(xy - prev).T) / dt


def gaussian_bev_target(traj, speeds, policy=None, meta=None, snap=False):
    """
    Build the Gaussian heatmap target of a future trajectory.

    **Parameters:**

    - *traj*: `trajdiff.world.Trajectory` or an array ``(T_f, >=2)`` of
      waypoints in the ego frame.

    - *speeds*: Per-waypoint speeds in m/s, length ``T_f``.  See
      `waypoint_speeds`.

    - *policy*: `RadiusPolicy`; the default is velocity-aware.

    - *meta*: `GridMeta`; the default is the 32x32 desk grid.

    - *snap*: Move on-grid waypoints to their nearest cell center first,
      so that every on-grid waypoint produces an exact positive cell.

    **Returns:** `HeatmapTarget` whose value at each cell center is the
    maximum over waypoints of ``exp(-d^2 / (2 sigma_i^2))``.  Off-grid
    waypoints still contribute their tails.
    """
    policy = RadiusPolicy() if policy is None else policy
    meta = GridMeta() if meta is None else meta
    xy = _waypoint_xy(traj)
    speeds = np.asarray(speeds, dtype=np.float64)
    if speeds.shape != (len(xy),):
        raise ShapeError('gaussian_bev_target', xy.shape, speeds.shape,
                         detail='one speed per waypoint')
    if not np.all(np.isfinite(speeds)) or np.any(speeds < 0):
        raise TrajectoryError('speeds must be finite and nonnegative')
    if snap:
        coords, inside = world_to_grid(xy, meta)
        snapped = grid_to_world(np.floor(coords + 0.5), meta)
        xy = np.where(inside[:, None], snapped, xy)
    sigma = policy.sigmas(speeds)
    centers = meta.cell_centers()
    dx = centers[..., 0, None] - xy[:, 0]
    dy = centers[..., 1, None] - xy[:, 1]
    values = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).max(axis=-1)
    return HeatmapTarget(values, meta)


def gaussian_focal_loss(pred, target, alpha=2.0, gamma=4.0, eps=1e-6):
    """
    Gaussian focal loss between a predicted heatmap and its target.

    **Parameters:**

    - *pred*: `Tensor` or array of predictions in ``(0, 1)``; a trailing
      channel axis of size 1 is dropped.  Values are clamped to
      ``[eps, 1 - eps]``.

    - *target*: `HeatmapTarget` or array with the same shape as *pred*.
      Leading batch axes are allowed on both.

    - *alpha*, *gamma*: Focusing exponents.

    **Returns:** A scalar `Tensor`: the negated sum of
    ``(1-P)^alpha log P`` over positive cells and
    ``P^alpha (1-GT)^gamma log(1-P)`` over the others, divided by the
    number of positive cells (at least one).
    """
    pred = tc.as_tensor(pred)
    gt = np.asarray(getattr(target, 'values', target), dtype=np.float64)
    if pred.ndim == gt.ndim + 1 and pred.shape[-1] == 1:
        pred = tc.reshape(pred, pred.shape[:-1])
    if pred.shape != gt.shape:
        raise ShapeError('gaussian_focal_loss', pred.shape, gt.shape)
    p = tc.clip(pred, eps, 1.0 - eps)
    pos = gt >= 1.0 - POSITIVE_TOLERANCE
    pos_term = ((1.0 - p) ** alpha) * tc.log(p) * pos
    neg_weight = np.where(pos, 0.0, (1.0 - gt) ** gamma)
    neg_term = (p ** alpha) * tc.log(1.0 - p) * neg_weight
    num_pos = max(int(pos.sum()), 1)
    return -tc.sum(pos_term + neg_term) * (1.0 / num_pos)


def write_pgm(target, path):
    """
    Write a heatmap as an ASCII (P2) PGM image, forward pointing up.

    Values are scaled to 0..255.  A sidecar ``<path>.meta`` holds one line
    ``H W resolution origin_x origin_y``.
    """
    values = np.clip(np.asarray(target.values), 0.0, 1.0)
    meta = target.meta
    pixels = np.floor(values * 255.0 + 0.5).astype(int)[::-1]
    lines = ['P2', '%d %d' % (meta.width, meta.height), '255']
    lines.extend(' '.join(str(v) for v in row) for row in pixels)
    with open(path, 'w') as fd:
        fd.write('\n'.join(lines) + '\n')
    with open(str(path) + '.meta', 'w') as fd:
        fd.write('%d %d %r %r %r\n' % (meta.height, meta.width, meta.resolution,
                                       meta.origin[0], meta.origin[1]))
    log.debug('wrote %dx%d heatmap to %s', meta.height, meta.width, path)


def read_pgm(path):
    """Read a heatmap written by `write_pgm`; values are quantized to 1/255."""
    with open(path) as fd:
        tokens = [tok for line in fd for tok in line.split('#')[0].split()]
    if not tokens or tokens[0] != 'P2':
        raise GridError('%s is not an ASCII PGM file' % path)
    width, height, maxval = (int(t) for t in tokens[1:4])
    pixels = np.array([int(t) for t in tokens[4:]], dtype=np.float64)
    if pixels.size != width * height:
        raise GridError('%s: expected %d pixels, found %d'
                        % (path, width * height, pixels.size))
    with open(str(path) + '.meta') as fd:
        fields = fd.read().split()
    meta = GridMeta(int(fields[0]), int(fields[1]), float(fields[2]),
                    (float(fields[3]), float(fields[4])))
    if meta.shape != (height, width):
        raise GridError('%s: image is %dx%d but metadata says %dx%d'
                        % (path, height, width, meta.height, meta.width))
    values = pixels.reshape(height, width)[::-1] / maxval
    return HeatmapTarget(np.ascontiguousarray(values), meta)

