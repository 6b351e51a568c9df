"""States, moving disc obstacles, constant-velocity predictions and collision predicates.

Everything in this module is an immutable value; all operations are pure.
Space-time points live in R^2 x [0, T]. Distances between space-time points
use the scaled metric (x, y, t * time_scale) so that time offsets are
commensurable with spatial ones.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)

# Preferred velocity used to scale the time axis of the space-time metric.
DEFAULT_TIME_SCALE = 2.0

_TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]; values already in range pass unchanged."""
    if -math.pi < theta <= math.pi:
        return theta
    return math.pi - (math.pi - theta) % _TWO_PI


@dataclass(frozen=True)
class RobotLimits:
    """Kinematic bounds of the disc robot (configuration, not ground truth)."""

    v_max: float = 2.5
    a_max: float = 2.0
    omega_max: float = 2.0


DEFAULT_LIMITS = RobotLimits()


@dataclass(frozen=True)
class RobotState:
    """Unicycle state: planar position [m], heading [rad], forward speed [m/s]."""

    x: float
    y: float
    theta: float
    v: float

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class RobotInput:
    """Unicycle input: longitudinal acceleration [m/s^2] and yaw rate [rad/s]."""

    a: float
    omega: float


@dataclass(frozen=True)
class Obstacle:
    """Moving disc obstacle with constant velocity."""

    id: int
    center: tuple[float, float]
    velocity: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"obstacle radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class ObstaclePrediction:
    """Predicted disc centers of one obstacle at times 0, h, ..., N*h."""

    obstacle_id: int
    positions: np.ndarray  # shape (N+1, 2), read-only by convention
    step: float
    radius: float

    @property
    def n_steps(self) -> int:
        return len(self.positions) - 1


@dataclass(frozen=True)
class StateSpacePoint:
    """A point (x, y, t) of the planar workspace augmented with bounded time."""

    x: float
    y: float
    t: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.t])


@dataclass(frozen=True)
class ObstacleSet:
    """All obstacle predictions over one planning horizon plus the robot radius.

    Predictions must share the sampling step and length; the horizon satisfies
    T = N * step. Obstacle centers between samples are linearly interpolated,
    which is exact for constant-velocity motion.
    """

    predictions: tuple[ObstaclePrediction, ...]
    robot_radius: float
    horizon: float

    def __post_init__(self):
        if self.predictions:
            steps = {p.step for p in self.predictions}
            lengths = {len(p.positions) for p in self.predictions}
            if len(steps) != 1 or len(lengths) != 1:
                raise ValueError("predictions must share step and length")
            n = next(iter(lengths)) - 1
            step = next(iter(steps))
            if not math.isclose(self.horizon, n * step, rel_tol=1e-9, abs_tol=1e-9):
                raise ValueError(
                    f"horizon {self.horizon} != N*h = {n * step} of the predictions"
                )

    @property
    def n_obstacles(self) -> int:
        return len(self.predictions)

    @cached_property
    def _tracks(self) -> np.ndarray:
        if not self.predictions:
            return np.zeros((0, 2, 2))
        return np.stack([p.positions for p in self.predictions])

    @cached_property
    def _combined_radii(self) -> np.ndarray:
        return np.array([p.radius + self.robot_radius for p in self.predictions])

    @cached_property
    def _step(self) -> float:
        return self.predictions[0].step if self.predictions else self.horizon

    def centers_at(self, t: np.ndarray) -> np.ndarray:
        """Interpolated obstacle centers, shape (n_obstacles, len(t), 2)."""
        tracks = self._tracks
        n_seg = tracks.shape[1] - 1
        k = np.asarray(t, dtype=float) / self._step
        idx = np.clip(k.astype(int), 0, n_seg - 1)
        frac = np.clip(k - idx, 0.0, 1.0)[None, :, None]
        lo = tracks[:, idx, :]
        hi = tracks[:, idx + 1, :]
        return lo + frac * (hi - lo)

    def free_mask(self, xy: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Element-wise freedom of points: True where no inflated disc is hit."""
        if not self.predictions:
            return np.ones(len(np.atleast_1d(t)), dtype=bool)
        centers = self.centers_at(t)
        d2 = np.square(centers - np.asarray(xy)[None]).sum(axis=2)
        return (d2 >= np.square(self._combined_radii)[:, None]).all(axis=0)

    def positions_at_index(self, k: int) -> np.ndarray:
        """Predicted centers at sample index k, shape (n_obstacles, 2)."""
        tracks = self._tracks
        k = min(max(k, 0), tracks.shape[1] - 1)
        return tracks[:, k, :]

    @property
    def combined_radii(self) -> np.ndarray:
        return self._combined_radii

    @property
    def tracks(self) -> np.ndarray:
        """All prediction samples, shape (n_obstacles, N+1, 2)."""
        return self._tracks


def robot_step(
    state: RobotState,
    u: RobotInput,
    h: float,
    limits: RobotLimits = DEFAULT_LIMITS,
) -> RobotState:
    """Integrate the unicycle one step; position advances with the pre-update speed."""
    a, omega = u.a, u.omega
    if abs(a) > limits.a_max + 1e-9 or abs(omega) > limits.omega_max + 1e-9:
        logger.warning("input (%.3f, %.3f) outside bounds, clamping", a, omega)
    a = min(max(a, -limits.a_max), limits.a_max)
    omega = min(max(omega, -limits.omega_max), limits.omega_max)
    x = state.x + state.v * math.cos(state.theta) * h
    y = state.y + state.v * math.sin(state.theta) * h
    theta = wrap_angle(state.theta + omega * h)
    v = min(max(state.v + a * h, 0.0), limits.v_max)
    return RobotState(x, y, theta, v)


def point_free(p: StateSpacePoint, obs: ObstacleSet) -> bool:
    """True iff p keeps at least the combined radius from every predicted disc."""
    return bool(obs.free_mask(np.array([[p.x, p.y]]), np.array([p.t]))[0])


def scaled_distance(
    a: StateSpacePoint, b: StateSpacePoint, time_scale: float = DEFAULT_TIME_SCALE
) -> float:
    """Euclidean distance in the (x, y, t*time_scale) metric."""
    return math.sqrt(
        (a.x - b.x) ** 2 + (a.y - b.y) ** 2 + ((a.t - b.t) * time_scale) ** 2
    )


def segments_free_mask(
    starts: np.ndarray,
    ends: np.ndarray,
    obs: ObstacleSet,
    ds: float = 0.1,
    time_scale: float = DEFAULT_TIME_SCALE,
) -> np.ndarray:
    """Batched segment collision test; one bool per (start, end) row of (x, y, t).

    Each segment is sampled at most ds apart in the scaled metric, endpoints
    included, and all samples go through a single free_mask query. Endpoints
    are ordered canonically per row so results are exactly symmetric.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    swap = _lexi_after(starts, ends)
    lo = np.where(swap[:, None], ends, starts)
    hi = np.where(swap[:, None], starts, ends)
    delta = hi - lo
    lengths = np.sqrt(
        delta[:, 0] ** 2 + delta[:, 1] ** 2 + (delta[:, 2] * time_scale) ** 2
    )
    counts = np.ceil(lengths / ds).astype(int) + 1
    np.maximum(counts, 2, out=counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    total = int(counts.sum())
    row = np.repeat(np.arange(len(counts)), counts)
    lam = (np.arange(total) - offsets[row]) / (counts[row] - 1)
    pts = lo[row] + lam[:, None] * delta[row]
    free = obs.free_mask(pts[:, :2], pts[:, 2])
    return np.logical_and.reduceat(free, offsets)


def _lexi_after(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """True per row where b precedes a in (t, x, y) lexicographic order."""
    return (
        (b[:, 2] < a[:, 2])
        | ((b[:, 2] == a[:, 2]) & (b[:, 0] < a[:, 0]))
        | ((b[:, 2] == a[:, 2]) & (b[:, 0] == a[:, 0]) & (b[:, 1] < a[:, 1]))
    )


def segment_free(
    a: StateSpacePoint,
    b: StateSpacePoint,
    obs: ObstacleSet,
    ds: float = 0.1,
    time_scale: float = DEFAULT_TIME_SCALE,
) -> bool:
    """Collision test of the straight space-time segment a-b at resolution ds."""
    return bool(
        segments_free_mask(a.as_array(), b.as_array(), obs, ds, time_scale)[0]
    )


def predict_constant_velocity(obstacle: Obstacle, n_steps: int, h: float) -> ObstaclePrediction:
    """Extrapolate an obstacle along its velocity for n_steps samples of length h."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    k = np.arange(n_steps + 1, dtype=float)[:, None]
    positions = np.asarray(obstacle.center, dtype=float)[None, :] + k * (
        h * np.asarray(obstacle.velocity, dtype=float)[None, :]
    )
    return ObstaclePrediction(
        obstacle_id=obstacle.id, positions=positions, step=h, radius=obstacle.radius
    )


def predictions_for(
    obstacles: list[Obstacle], n_steps: int, h: float, robot_radius: float
) -> ObstacleSet:
    """Bundle constant-velocity predictions of all obstacles into one ObstacleSet."""
    preds = tuple(predict_constant_velocity(o, n_steps, h) for o in obstacles)
    return ObstacleSet(predictions=preds, robot_radius=robot_radius, horizon=n_steps * h)
