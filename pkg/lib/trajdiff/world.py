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
Synthetic driving scenarios.

Every scenario is expressed in the ego frame at ``t = 0``: x forward,
y left, headings counter-clockwise from +x.  A scenario holds a lane-center
route, the drivable area rasterized on the BEV grid, disc obstacles moving
at constant velocity, the ego status, and an expert trajectory produced by
a pure-pursuit route follower with a constant-deceleration stop profile.

The expert is simulated on a fine time step and kept as a dense
`ExpertPath`, which is what the initial-point resampler interpolates.
"""

import dataclasses
import logging
import math

import numpy as np

from . import nn
from . import tensorcore as tc
from .encoder import BevGrid, EgoStatus
from .errors import GridError, ScenarioError, ShapeError, TrajectoryError
from .heatmap import GridMeta

__all__ = ['ARCHETYPES', 'Trajectory', 'Obstacle', 'Scenario', 'WorldParams',
           'ExpertPath', 'generate_scenario', 'scenario_seed', 'build_scenario',
           'simulate_expert', 'expert_policy', 'resample_trajectory',
           'resample_scenario', 'inject_noise', 'noisy_indices',
           'rasterize_scenario', 'render_bev_input', 'BevStem',
           'route_arclength', 'project_to_route', 'route_distance',
           'scenario_to_record', 'scenario_from_record', 'check_grid',
           'RASTER_CHANNELS']

log = logging.getLogger(__name__)

ARCHETYPES = ('straight', 'left-turn', 'right-turn', 'stop-for-obstacle',
              'lane-follow-curve')

ARCHETYPE_COMMANDS = {'straight': 'straight', 'left-turn': 'left',
                      'right-turn': 'right', 'stop-for-obstacle': 'straight',
                      'lane-follow-curve': 'straight'}

RASTER_CHANNELS = 4


def wrap_angle(theta):
    """Wrap angles to ``(-pi, pi]``; angles already inside are returned
    unchanged."""
    theta = np.asarray(theta, dtype=np.float64)
    wrapped = np.pi - np.mod(np.pi - theta, 2 * np.pi)
    return np.where((theta > -np.pi) & (theta <= np.pi), theta, wrapped)


def to_frame(xy, pose):
    """Express world points in the frame of *pose* ``(x, y, theta)``."""
    c, s = math.cos(pose[2]), math.sin(pose[2])
    d = np.asarray(xy, dtype=np.float64) - np.asarray(pose[:2], dtype=np.float64)
    return np.stack([c * d[..., 0] + s * d[..., 1],
                     -s * d[..., 0] + c * d[..., 1]], axis=-1)


def from_frame(xy, pose):
    c, s = math.cos(pose[2]), math.sin(pose[2])
    d = np.asarray(xy, dtype=np.float64)
    return np.stack([pose[0] + c * d[..., 0] - s * d[..., 1],
                     pose[1] + s * d[..., 0] + c * d[..., 1]], axis=-1)


def _rotate(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    v = np.asarray(v, dtype=np.float64)
    return np.stack([c * v[..., 0] - s * v[..., 1],
                     s * v[..., 0] + c * v[..., 1]], axis=-1)


@dataclasses.dataclass(eq=False)
class Trajectory:
    """Future ego poses ``(x, y, theta)`` at ``dt, 2 dt, ...``."""

    points: np.ndarray
    dt: float = 0.5

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ShapeError('trajectory', pts.shape, detail='expected (T_f, 3)')
        if not np.all(np.isfinite(pts)):
            raise TrajectoryError('trajectory has non-finite waypoints')
        if not self.dt > 0:
            raise TrajectoryError('dt must be positive, got %r' % self.dt)
        pts[:, 2] = wrap_angle(pts[:, 2])
        self.points = pts
        self.dt = float(self.dt)

    def __len__(self):
        return len(self.points)

    @property
    def xy(self):
        return self.points[:, :2]

    @property
    def heading(self):
        return self.points[:, 2]

    @property
    def horizon(self):
        return len(self.points) * self.dt

    @property
    def times(self):
        return self.dt * np.arange(1, len(self.points) + 1)

    def to_world(self, pose):
        """Re-express the waypoints of a trajectory given in the frame of
        *pose* in the frame *pose* itself is expressed in."""
        pts = np.empty_like(self.points)
        pts[:, :2] = from_frame(self.xy, pose)
        pts[:, 2] = self.heading + pose[2]
        return Trajectory(pts, self.dt)

    def to_dict(self):
        return {'points': self.points.tolist(), 'dt': self.dt}

    @classmethod
    def from_dict(cls, d):
        return cls(d['points'], d['dt'])


@dataclasses.dataclass(frozen=True)
class Obstacle:
    center: tuple
    radius: float
    velocity: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))
        object.__setattr__(self, 'velocity', tuple(float(v) for v in self.velocity))
        object.__setattr__(self, 'radius', float(self.radius))
        if not self.radius > 0:
            raise ScenarioError('obstacle radius must be positive')

    def position_at(self, t):
        """Centers at time(s) *t*, shape ``np.shape(t) + (2,)``."""
        t = np.asarray(t, dtype=np.float64)[..., None]
        return np.asarray(self.center) + t * np.asarray(self.velocity)

    def to_dict(self):
        return {'center': list(self.center), 'radius': self.radius,
                'velocity': list(self.velocity)}

    @classmethod
    def from_dict(cls, d):
        return cls(d['center'], d['radius'], d['velocity'])


@dataclasses.dataclass
class WorldParams:
    """Knobs of the scenario generator."""

    meta: GridMeta = dataclasses.field(default_factory=GridMeta)
    horizon_points: int = 8
    dt: float = 0.5
    sim_dt: float = 0.05
    archetypes: tuple = ARCHETYPES
    obstacle_count: tuple = (0, 3)
    obstacle_radius: tuple = (0.5, 1.5)
    obstacle_speed_max: float = 1.5
    lead_probability: float = 0.3
    speed_range: tuple = (2.0, 6.0)
    road_half_width: float = 3.5
    ego_radius: float = 1.0
    comfort_decel: float = 2.0
    max_lateral_accel: float = 1.5
    stop_margin: float = 0.5
    max_retries: int = 20

    def __post_init__(self):
        unknown = set(self.archetypes) - set(ARCHETYPES)
        if not self.archetypes or unknown:
            raise ScenarioError('unknown archetypes %s' % sorted(unknown))
        lo, hi = self.obstacle_count
        if not 0 <= lo <= hi:
            raise ScenarioError('bad obstacle count range %r' % (self.obstacle_count,))
        if not 0 <= self.speed_range[0] <= self.speed_range[1]:
            raise ScenarioError('bad speed range %r' % (self.speed_range,))
        if self.horizon_points < 1 or not self.dt > 0 or not self.sim_dt > 0:
            raise ScenarioError('horizon_points, dt and sim_dt must be positive')
        ratio = self.dt / self.sim_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ScenarioError('dt must be a multiple of sim_dt')
        self.archetypes = tuple(self.archetypes)
        self.obstacle_count = tuple(self.obstacle_count)
        self.obstacle_radius = tuple(self.obstacle_radius)
        self.speed_range = tuple(self.speed_range)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d['meta'] = self.meta.to_dict()
        for key in ('archetypes', 'obstacle_count', 'obstacle_radius', 'speed_range'):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d['meta'] = GridMeta.from_dict(d['meta'])
        return cls(**d)


@dataclasses.dataclass(eq=False)
class Scenario:
    seed: int
    meta: GridMeta
    drivable: np.ndarray
    obstacles: tuple
    route: np.ndarray
    ego0: EgoStatus
    expert: Trajectory
    archetype: str = 'straight'
    cruise_speed: float = 0.0
    road_half_width: float = 3.5
    offset: float = 0.0

    def __post_init__(self):
        self.drivable = np.asarray(self.drivable, dtype=bool)
        self.route = np.asarray(self.route, dtype=np.float64)
        self.obstacles = tuple(self.obstacles)
        if self.drivable.shape != self.meta.shape:
            raise ShapeError('drivable', self.drivable.shape, self.meta.shape)
        if self.route.ndim != 2 or self.route.shape[1] != 2 or len(self.route) < 2:
            raise ShapeError('route', self.route.shape, detail='expected (P >= 2, 2)')

    def obstacle_positions(self, times):
        """Obstacle centers ``(O, len(times), 2)`` and radii ``(O,)``."""
        times = np.asarray(times, dtype=np.float64)
        if not self.obstacles:
            return np.zeros((0,) + times.shape + (2,)), np.zeros(0)
        centers = np.stack([o.position_at(times) for o in self.obstacles])
        radii = np.array([o.radius for o in self.obstacles])
        return centers, radii


# route geometry

def route_arclength(route):
    seg = np.diff(np.asarray(route, dtype=np.float64), axis=0)
    return np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])


def _project(points, route):
    points = np.asarray(points, dtype=np.float64)
    route = np.asarray(route, dtype=np.float64)
    flat = points.reshape(-1, 2)
    a, b = route[:-1], route[1:]
    ab = b - a
    len2 = np.maximum((ab * ab).sum(axis=1), 1e-12)
    ap = flat[:, None, :] - a[None, :, :]
    u = np.clip((ap * ab).sum(axis=2) / len2, 0.0, 1.0)
    nearest = a + u[..., None] * ab
    d2 = ((flat[:, None, :] - nearest) ** 2).sum(axis=2)
    best = np.argmin(d2, axis=1)
    rows = np.arange(len(flat))
    arc = route_arclength(route)
    s = arc[best] + u[rows, best] * np.sqrt(len2[best])
    dist = np.sqrt(d2[rows, best])
    shape = points.shape[:-1]
    return s.reshape(shape), dist.reshape(shape)


def project_to_route(points, route):
    """Arc length along *route* of the nearest route point to each point."""
    return _project(points, route)[0]


def route_distance(points, route):
    """Euclidean distance from each point to the route polyline."""
    return _project(points, route)[1]


def point_at_arc(route, s):
    """Route point at arc length *s*, extrapolating past either end."""
    route = np.asarray(route, dtype=np.float64)
    arc = route_arclength(route)
    i = int(np.clip(np.searchsorted(arc, s, side='right') - 1, 0, len(route) - 2))
    seg = route[i + 1] - route[i]
    length = arc[i + 1] - arc[i]
    u = (s - arc[i]) / length if length > 0 else 0.0
    return route[i] + u * seg


def _polyline(points, spacing=0.5):
    """Densify a polyline so that no segment exceeds *spacing*."""
    out = [points[0]]
    for p, q in zip(points[:-1], points[1:]):
        n = max(int(math.ceil(np.hypot(*(q - p)) / spacing)), 1)
        for k in range(1, n + 1):
            out.append(p + (q - p) * (k / n))
    return np.array(out)


def _arc_points(start, heading, radius, sweep, spacing=0.5):
    """Points along a circular arc leaving *start* at *heading*; positive
    *sweep* turns left."""
    n = max(int(math.ceil(abs(sweep) * radius / spacing)), 1)
    sign = 1.0 if sweep > 0 else -1.0
    center = start + sign * radius * np.array([-math.sin(heading), math.cos(heading)])
    phis = np.linspace(0.0, sweep, n + 1)[1:]
    angles = heading - sign * math.pi / 2 + phis
    return center + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _make_route(archetype, rng):
    back = np.array([[-8.0, 0.0], [0.0, 0.0]])
    if archetype in ('straight', 'stop-for-obstacle'):
        return _polyline(np.array([[-8.0, 0.0], [60.0, 0.0]])), None
    if archetype in ('left-turn', 'right-turn'):
        sign = 1.0 if archetype == 'left-turn' else -1.0
        d = rng.uniform(3.0, 8.0)
        radius = rng.uniform(10.0, 16.0)
        lead_in = _polyline(np.array([[-8.0, 0.0], [d, 0.0]]))
        arc = _arc_points(np.array([d, 0.0]), 0.0, radius, sign * math.pi / 2)
        end = arc[-1]
        exit_ = _polyline(np.array([end, end + [0.0, sign * 40.0]]))[1:]
        return np.vstack([lead_in, arc, exit_]), radius
    sign = rng.choice([-1.0, 1.0])
    radius = rng.uniform(30.0, 60.0)
    sweep = min(60.0 / radius, math.pi / 2)
    arc = _arc_points(np.array([0.0, 0.0]), 0.0, radius, sign * sweep)
    heading = sign * sweep
    end = arc[-1]
    tangent = np.array([math.cos(heading), math.sin(heading)])
    exit_ = _polyline(np.array([end, end + 20.0 * tangent]))[1:]
    return np.vstack([_polyline(back), arc, exit_]), radius


def _drivable_mask(route, meta, half_width):
    return route_distance(meta.cell_centers(), route) <= half_width


# expert

@dataclasses.dataclass(eq=False)
class ExpertPath:
    """Densely sampled expert motion: times, poses and speeds.

    Headings are kept unwrapped so they interpolate smoothly.
    """

    times: np.ndarray
    xy: np.ndarray
    theta: np.ndarray
    speed: np.ndarray

    def pose_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < self.times[0] - 1e-9) or np.any(t > self.times[-1] + 1e-9):
            raise TrajectoryError('time outside expert path [%g, %g]'
                                  % (self.times[0], self.times[-1]))
        x = np.interp(t, self.times, self.xy[:, 0])
        y = np.interp(t, self.times, self.xy[:, 1])
        th = np.interp(t, self.times, self.theta)
        return np.stack([x, y, th], axis=-1)

    def speed_at(self, t):
        return np.interp(t, self.times, self.speed)

    @classmethod
    def from_trajectory(cls, traj, start=(0.0, 0.0, 0.0)):
        """Piecewise-linear path through ``start`` and the waypoints,
        extended by one step at the final segment's velocity."""
        pts = np.vstack([np.asarray(start, dtype=np.float64)[None, :], traj.points])
        step = pts[-1, :2] - pts[-2, :2]
        extra = np.concatenate([pts[-1, :2] + step, pts[-1, 2:]])
        pts = np.vstack([pts, extra])
        times = traj.dt * np.arange(len(pts))
        seg = np.hypot(*np.diff(pts[:, :2], axis=0).T) / traj.dt
        speed = np.concatenate([seg[:1], seg])
        return cls(times, pts[:, :2], np.unwrap(pts[:, 2]), speed)


def _stop_plan(v0, distance, params):
    """Piecewise-constant longitudinal acceleration ``[(t_start, a), ...]``
    that brings speed *v0* to rest exactly *distance* meters ahead.

    With room for a comfortable stop the expert cruises, then brakes at no
    more than ``comfort_decel`` from a simulation tick.  Otherwise it brakes
    as hard as the stop needs, and stops within one tick when the obstacle
    already reaches into its envelope.
    """
    if distance is None or v0 <= 0.0:
        return [(0.0, 0.0)]
    h = params.sim_dt
    if distance <= 0.0:
        return [(0.0, -v0 / h)]
    comfortable = v0 * v0 / (2.0 * params.comfort_decel)
    if distance >= comfortable:
        t_brake = math.floor((distance - comfortable) / v0 / h) * h
        return [(0.0, 0.0), (t_brake, -v0 * v0 / (2.0 * (distance - v0 * t_brake)))]
    return [(0.0, -v0 * v0 / (2.0 * distance))]


def _accel_at(plan, t):
    a = plan[0][1]
    for start, value in plan:
        if t + 1e-12 >= start:
            a = value
    return a


def _blocking_distance(route, obstacles, params):
    """Route distance available before the first static obstacle that
    blocks the lane, or ``None``."""
    best = None
    for o in obstacles:
        if o.velocity != (0.0, 0.0):
            continue
        s, d = _project(np.array(o.center), route)
        s0 = project_to_route(np.zeros(2), route)
        if d < o.radius + params.ego_radius and s > s0:
            avail = float(s - s0 - o.radius - params.ego_radius - params.stop_margin)
            best = avail if best is None else min(best, avail)
    return best


def simulate_expert(s, params=None):
    """
    Simulate the expert on the fine time step.

    **Parameters:**

    - *s*: `Scenario`; its route, obstacles and cruise speed are used.

    - *params*: `WorldParams` giving the time steps and limits.

    **Returns:** `ExpertPath` covering the horizon plus one extra
    waypoint interval, so that offsets up to ``dt`` can be resampled.
    """
    params = WorldParams() if params is None else params
    route = s.route
    h = params.sim_dt
    n_steps = int(round((params.horizon_points + 1) * params.dt / h))
    v = float(s.cruise_speed)
    plan = _stop_plan(v, _blocking_distance(route, s.obstacles, params), params)
    x = y = th = 0.0
    times, xs, ys, ths, vs = [0.0], [x], [y], [th], [v]
    for k in range(n_steps):
        a = _accel_at(plan, k * h)
        if a < 0 and v + a * h <= 0.0:
            ds = v * v / (-2.0 * a) if v > 0 else 0.0
            v_next = 0.0
        else:
            ds = v * h + 0.5 * a * h * h
            v_next = v + a * h
        if ds > 0:
            lookahead = max(4.0, 1.5 * v)
            s_now = float(project_to_route(np.array([x, y]), route))
            target = point_at_arc(route, s_now + lookahead)
            dx, dy = target[0] - x, target[1] - y
            alpha = math.atan2(dy, dx) - th
            kappa = 2.0 * math.sin(alpha) / max(math.hypot(dx, dy), 1e-6)
            kappa = max(-0.3, min(0.3, kappa))
            th_mid = th + 0.5 * kappa * ds
            x += ds * math.cos(th_mid)
            y += ds * math.sin(th_mid)
            th += kappa * ds
        v = v_next
        times.append((k + 1) * h)
        xs.append(x)
        ys.append(y)
        ths.append(th)
        vs.append(v)
    return ExpertPath(np.array(times), np.stack([xs, ys], axis=1),
                      np.array(ths), np.array(vs))


def _sample_path(path, offset, points, dt):
    pose0 = path.pose_at(offset)
    poses = path.pose_at(offset + dt * np.arange(1, points + 1))
    out = np.empty_like(poses)
    out[:, :2] = to_frame(poses[:, :2], pose0)
    out[:, 2] = poses[:, 2] - pose0[2]
    return Trajectory(out, dt)


def expert_policy(s, params=None):
    """
    Expert trajectory of a scenario.

    A pure-pursuit route follower holding the cruise speed, or braking
    with a constant deceleration to stop ``stop_margin`` short of the
    first static obstacle in the lane.  The stop is always emitted, braking
    harder than ``comfort_decel`` when the obstacle is too close; the
    generator then discards such draws through the comfort check.
    """
    params = WorldParams() if params is None else params
    return _sample_path(simulate_expert(s, params), 0.0,
                        params.horizon_points, params.dt)


def resample_trajectory(path, offset, points=None, dt=None):
    """
    Re-sample a continuous expert path starting at time *offset*.

    **Parameters:**

    - *path*: `ExpertPath`, or a `Trajectory` whose piecewise-linear
      interpolation (through the origin) is taken as the path.

    - *offset*: Start time in ``[0, dt)``.

    - *points*, *dt*: Waypoint count and spacing; default to those of a
      `Trajectory` argument, or 8 and 0.5 s.

    **Returns:** `Trajectory` expressed in the frame of the pose at
    *offset*.
    """
    if isinstance(path, Trajectory):
        points = len(path) if points is None else points
        dt = path.dt if dt is None else dt
        path = ExpertPath.from_trajectory(path)
    points = 8 if points is None else points
    dt = 0.5 if dt is None else dt
    if not 0.0 <= offset < dt:
        raise TrajectoryError('offset must lie in [0, %g), got %r' % (dt, offset))
    return _sample_path(path, float(offset), points, dt)


def resample_scenario(s, offset, params=None):
    """
    The whole scenario seen from the expert pose at time *offset*.

    Obstacles are advanced by *offset* seconds; the route, obstacle
    velocities and drivable area are re-expressed in the new frame; the
    ego status takes the expert speed and acceleration at *offset*.
    """
    params = WorldParams() if params is None else params
    if offset == 0.0:
        return s
    path = simulate_expert(s, params)
    expert = resample_trajectory(path, offset, params.horizon_points, params.dt)
    pose = path.pose_at(offset)
    obstacles = tuple(
        Obstacle(to_frame(o.position_at(offset), pose), o.radius,
                 _rotate(o.velocity, -pose[2]))
        for o in s.obstacles)
    route = to_frame(s.route, pose)
    v = float(path.speed_at(offset))
    accel = float((path.speed_at(offset + params.sim_dt) - v) / params.sim_dt)
    ego0 = EgoStatus((v, 0.0), (accel, 0.0), s.ego0.command)
    return Scenario(s.seed, s.meta, _drivable_mask(route, s.meta, s.road_half_width),
                    obstacles, route, ego0, expert, s.archetype, v,
                    s.road_half_width, float(offset))


# generator

def scenario_seed(master_seed, index):
    """Independent per-scenario seed derived from a master seed."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def build_scenario(seed, route, obstacles, ego0, params=None, archetype='straight',
                   cruise_speed=None):
    """Assemble a scenario from its world description and compute the
    drivable area and expert."""
    params = WorldParams() if params is None else params
    route = np.asarray(route, dtype=np.float64)
    cruise = ego0.speed if cruise_speed is None else float(cruise_speed)
    drivable = _drivable_mask(route, params.meta, params.road_half_width)
    placeholder = Trajectory(np.zeros((params.horizon_points, 3)), params.dt)
    s = Scenario(seed, params.meta, drivable, tuple(obstacles), route, ego0,
                 placeholder, archetype, cruise, params.road_half_width)
    s.expert = expert_policy(s, params)
    return s


def _scenery(rng, route, params, count):
    obstacles = []
    xmin, xmax, ymin, ymax = params.meta.extent
    for _ in range(50 * max(count, 1)):
        if len(obstacles) >= count:
            break
        r = rng.uniform(*params.obstacle_radius)
        c = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        s_near, d = _project(c, route)
        if d < params.road_half_width + r + 0.5 or np.hypot(*c) < r + 3.0:
            continue
        speed = rng.uniform(0.0, params.obstacle_speed_max) if rng.random() < 0.5 else 0.0
        away = (c - point_at_arc(route, float(s_near))) / max(float(d), 1e-9)
        obstacles.append(Obstacle(c, r, speed * away))
    return obstacles


def _draw(seed, attempt, params):
    rng = np.random.default_rng([int(seed), int(attempt)])
    archetype = params.archetypes[rng.integers(len(params.archetypes))]
    route, radius = _make_route(archetype, rng)
    lo, hi = params.speed_range
    if radius is not None and archetype != 'lane-follow-curve':
        hi = min(hi, 0.85 * math.sqrt(params.max_lateral_accel * radius))
        lo = min(lo, hi)
    v0 = float(rng.uniform(lo, hi))
    obstacles = _scenery(rng, route, params, int(rng.integers(params.obstacle_count[0],
                                                             params.obstacle_count[1] + 1)))
    if archetype == 'stop-for-obstacle':
        r = float(rng.uniform(0.8, 1.2))
        near = r + params.ego_radius + params.stop_margin \
            + v0 * v0 / (2.0 * params.comfort_decel) + 1.0
        obstacles.append(Obstacle((rng.uniform(near, max(near, 22.0)), 0.0), r))
    elif archetype == 'straight' and rng.random() < params.lead_probability:
        obstacles.append(Obstacle((rng.uniform(10.0, 16.0), 0.0), 1.0,
                                  (v0 + rng.uniform(1.0, 2.0), 0.0)))
    accel = float(rng.uniform(-0.3, 0.3)) if v0 > 0 else 0.0
    ego0 = EgoStatus.from_command((v0, 0.0), (accel, 0.0),
                                  ARCHETYPE_COMMANDS[archetype])
    return build_scenario(seed, route, obstacles, ego0, params, archetype, v0)


def generate_scenario(seed, params=None):
    """
    Generate one scenario, deterministically in *seed*.

    Draws whose expert fails the no-collision, drivable-area or comfort
    checks are discarded and redrawn from the next attempt's stream.

    **Raises:** `ScenarioError` after ``params.max_retries`` failures.
    """
    from .scoring import ScoringConfig, score_trajectory

    params = WorldParams() if params is None else params
    scoring = ScoringConfig(ego_radius=params.ego_radius)
    for attempt in range(params.max_retries):
        s = _draw(seed, attempt, params)
        report = score_trajectory(s, s.expert, scoring)
        if report.nc == 1 and report.dac == 1 and report.comf == 1:
            return s
        log.debug('scenario seed %d attempt %d rejected (%s): nc=%g dac=%g comf=%g',
                  seed, attempt, s.archetype, report.nc, report.dac, report.comf)
    raise ScenarioError('no feasible scenario for seed %d after %d attempts'
                        % (seed, params.max_retries))


# augmentation

def inject_noise(traj, sigma, rng):
    """Add iid ``N(0, sigma^2)`` noise to the waypoint positions."""
    if sigma < 0:
        raise ValueError('sigma must be nonnegative, got %r' % sigma)
    if sigma == 0:
        return Trajectory(traj.points, traj.dt)
    pts = traj.points.copy()
    pts[:, :2] += rng.normal(0.0, sigma, size=pts[:, :2].shape)
    return Trajectory(pts, traj.dt)


def noisy_indices(count, fraction, rng):
    """Sorted indices of ``round(fraction * count)`` samples picked without
    replacement."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError('fraction must lie in [0, 1], got %r' % fraction)
    k = int(round(fraction * count))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    return np.sort(rng.choice(count, size=k, replace=False))


# rendering

def rasterize_scenario(s):
    """
    Raster channels ``(H, W, 4)`` of a scenario at ``t = 0``:

    0. drivable mask
    1. obstacle occupancy
    2. distance to the nearest obstacle edge / 10 m, clipped to 1
    3. route proximity ``exp(-d^2 / (2 * 1.5^2))``
    """
    centers = s.meta.cell_centers()
    out = np.zeros(s.meta.shape + (RASTER_CHANNELS,))
    out[..., 0] = s.drivable
    edge = np.full(s.meta.shape, np.inf)
    for o in s.obstacles:
        d = np.hypot(centers[..., 0] - o.center[0], centers[..., 1] - o.center[1])
        out[..., 1] = np.maximum(out[..., 1], d <= o.radius)
        edge = np.minimum(edge, np.maximum(d - o.radius, 0.0))
    out[..., 2] = np.clip(edge / 10.0, 0.0, 1.0)
    d_route = route_distance(centers, s.route)
    out[..., 3] = np.exp(-d_route * d_route / (2.0 * 1.5 ** 2))
    return out


class BevStem(nn.Module):
    """Learned 1x1 lift of the raster channels to the model width, plus a
    per-cell positional embedding."""

    def __init__(self, meta, width, rng):
        self.meta = meta
        self.proj = nn.Linear(RASTER_CHANNELS, width, rng)
        self.pos = nn.normal_parameter(rng, meta.shape + (width,))

    def forward(self, raster):
        raster = tc.as_tensor(raster)
        if raster.shape[-3:] != self.meta.shape + (RASTER_CHANNELS,):
            raise ShapeError('bev stem', raster.shape,
                             self.meta.shape + (RASTER_CHANNELS,))
        return BevGrid(self.proj(raster) + self.pos, self.meta)


def render_bev_input(s, stem):
    return stem(rasterize_scenario(s))


# records

def _rle_encode(mask):
    flat = np.asarray(mask, dtype=bool).ravel()
    runs, current, count = [], False, 0
    for value in flat:
        if value == current:
            count += 1
        else:
            runs.append(count)
            current, count = value, 1
    runs.append(count)
    return runs


def _rle_decode(runs, shape):
    flat = np.zeros(int(np.prod(shape)), dtype=bool)
    pos, value = 0, False
    for n in runs:
        flat[pos:pos + n] = value
        pos += n
        value = not value
    if pos != flat.size:
        raise ScenarioError('drivable run lengths cover %d cells, expected %d'
                            % (pos, flat.size))
    return flat.reshape(shape)


def scenario_to_record(s):
    return {
        'seed': int(s.seed),
        'archetype': s.archetype,
        'meta': s.meta.to_dict(),
        'drivable_rle': _rle_encode(s.drivable),
        'obstacles': [o.to_dict() for o in s.obstacles],
        'route': s.route.tolist(),
        'ego0': s.ego0.to_dict(),
        'expert': s.expert.to_dict(),
        'cruise_speed': float(s.cruise_speed),
        'road_half_width': float(s.road_half_width),
        'offset': float(s.offset),
    }


def scenario_from_record(rec):
    meta = GridMeta.from_dict(rec['meta'])
    return Scenario(
        seed=rec['seed'], meta=meta,
        drivable=_rle_decode(rec['drivable_rle'], meta.shape),
        obstacles=tuple(Obstacle.from_dict(o) for o in rec['obstacles']),
        route=np.array(rec['route'], dtype=np.float64),
        ego0=EgoStatus.from_dict(rec['ego0']),
        expert=Trajectory.from_dict(rec['expert']),
        archetype=rec['archetype'], cruise_speed=rec['cruise_speed'],
        road_half_width=rec['road_half_width'], offset=rec['offset'])


def check_grid(s, meta):
    if s.meta != meta:
        raise GridError('scenario grid %r does not match %r' % (s.meta, meta))
