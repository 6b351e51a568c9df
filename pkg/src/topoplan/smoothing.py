"""Smoothing of geometric trajectories into kinematically meaningful splines.

Step 1 samples each start-to-goal polyline at regular time intervals and
minimizes an unconstrained quadratic cost over the sampled control points
(closeness to the polyline, second-difference smoothness, a quadratic obstacle
penalty, and closeness to a constant-speed reference). Step 2 fits one cubic
spline per axis through the optimized points, clamped to the robot's current
velocity at the start and with a free (zero-curvature) end.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.interpolate import CubicSpline

from .prm import GeometricTrajectory
from .world import ObstacleSet

logger = logging.getLogger(__name__)


class SingularSystem(RuntimeError):
    """The assembled quadratic form is not positive definite."""


@dataclass(frozen=True)
class SmoothingWeights:
    """Term weights of the control-point cost (defaults from the experiments)."""

    w_geo: float = 25.0
    w_smooth: float = 10.0
    w_obst: float = 0.5
    w_vel: float = 0.01
    # Sign of the distance part of the obstacle cost's linear term. The
    # published formula is kept verbatim under +1; -1 flips it for comparison.
    obstacle_linear_sign: float = 1.0

    def __post_init__(self):
        if min(self.w_geo, self.w_smooth, self.w_obst, self.w_vel) < 0:
            raise ValueError("weights must be nonnegative")


@dataclass(frozen=True)
class ControlPointSet:
    """Optimizable points Q, their fixed references Q-bar, and the sample step."""

    points: np.ndarray  # (n, 2)
    reference: np.ndarray  # (n, 2)
    dt: float

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dt


@dataclass(frozen=True)
class GuidanceSpline:
    """Piecewise-cubic trajectory [0, T] -> R^2 with its topology identifiers.

    Per interval i the x coordinate is a*s^3 + b*s^2 + c*s + d with
    s = t - knots[i]; same layout for y.
    """

    coeffs_x: np.ndarray  # (n_intervals, 4)
    coeffs_y: np.ndarray
    knots: np.ndarray  # (n_intervals + 1,)
    trajectory_id: int
    segment_ids: tuple[int, ...]

    @property
    def duration(self) -> float:
        return float(self.knots[-1])

    def sample(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Position, velocity and acceleration at times t (clamped to [0, T])."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < -1e-12) or np.any(t > self.duration + 1e-12):
            logger.warning("spline sampled outside [0, %.3f], clamping", self.duration)
        t = np.clip(t, 0.0, self.duration)
        idx = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0,
                      len(self.knots) - 2)
        s = t - self.knots[idx]
        pos = np.empty((len(t), 2))
        vel = np.empty((len(t), 2))
        acc = np.empty((len(t), 2))
        for col, coeffs in ((0, self.coeffs_x), (1, self.coeffs_y)):
            a, b, c, d = (coeffs[idx, k] for k in range(4))
            pos[:, col] = ((a * s + b) * s + c) * s + d
            vel[:, col] = (3.0 * a * s + 2.0 * b) * s + c
            acc[:, col] = 6.0 * a * s + 2.0 * b
        return pos, vel, acc


def spline_sample(spline: GuidanceSpline, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact polynomial evaluation of position, velocity, acceleration at t."""
    return spline.sample(t)


def sample_control_points(geo: GeometricTrajectory, n_pts: int = 20) -> ControlPointSet:
    """Sample the polyline at n_pts regular time intervals spanning its duration."""
    if n_pts < 2:
        raise ValueError("need at least two control points")
    duration = float(geo.trajectory.points[-1, 2])
    dt = duration / (n_pts - 1)
    times = np.arange(n_pts) * dt
    ref = geo.trajectory.eval_time(times)
    return ControlPointSet(points=ref.copy(), reference=ref, dt=dt)


def velocity_reference_points(
    cps: ControlPointSet,
    v_ref: float,
    v0: np.ndarray,
    heading: float | None = None,
) -> np.ndarray:
    """Reference points advancing at constant speed v_ref along the path directions.

    The first step direction is the robot's current velocity when it is
    non-negligible; degenerate (coincident) steps reuse the previous direction
    and fall back to the robot heading when there is none.
    """
    ref = cps.reference
    n = len(ref)
    v0 = np.asarray(v0, dtype=float)
    if heading is not None:
        last_dir = np.array([math.cos(heading), math.sin(heading)])
    else:
        last_dir = np.array([1.0, 0.0])
    out = np.empty_like(ref)
    out[0] = ref[0]
    for i in range(n - 1):
        step = ref[i + 1] - ref[i]
        norm = float(np.hypot(step[0], step[1]))
        if i == 0 and float(np.hypot(v0[0], v0[1])) > 1e-3:
            direction = v0 / np.hypot(v0[0], v0[1])
        elif norm > 1e-12:
            direction = step / norm
        else:
            direction = last_dir
        last_dir = direction
        out[i + 1] = out[i] + v_ref * direction * cps.dt
    return out


def _second_difference(n: int) -> np.ndarray:
    d = np.zeros((max(n - 2, 0), n))
    for i in range(n - 2):
        d[i, i] = 1.0
        d[i, i + 1] = -2.0
        d[i, i + 2] = 1.0
    return d


def _obstacle_terms(
    cps: ControlPointSet, obs: ObstacleSet, sign: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-point 2x2 obstacle Hessians and linear terms, summed over obstacles."""
    n = cps.n_points
    if obs.n_obstacles == 0:
        return np.zeros((n, 2, 2)), np.zeros((n, 2))
    step = obs.predictions[0].step
    n_pred = len(obs.predictions[0].positions) - 1
    radii = np.array([p.radius for p in obs.predictions]) + obs.robot_radius
    k = np.clip(np.round(cps.times / step).astype(int), 0, n_pred)
    tracks = np.stack([p.positions for p in obs.predictions])  # (n_obs, N+1, 2)
    centers = tracks[:, k, :]  # (n_obs, n, 2)
    a = cps.reference[None, :, :] - centers
    h = 0.5 * np.einsum("jni,jnk->jnik", a, a)  # (n_obs, n, 2, 2)
    h_o = np.einsum("jnik,jnk->jni", 2.0 * h, centers)
    f = -sign * (1.0 + radii)[:, None, None] * a - h_o
    return h.sum(axis=0), f.sum(axis=0)


def points_cost(
    q: np.ndarray,
    cps: ControlPointSet,
    obs: ObstacleSet,
    w: SmoothingWeights,
    q_vel: np.ndarray,
) -> float:
    """Direct evaluation of the smoothing cost at control points q (n, 2)."""
    q = np.asarray(q, dtype=float).reshape(cps.n_points, 2)
    j_geo = float(np.sum((q - cps.reference) ** 2))
    j_smooth = float(np.sum((q[:-2] - 2.0 * q[1:-1] + q[2:]) ** 2))
    j_vel = float(np.sum((q - q_vel) ** 2))
    h_blocks, f_sum = _obstacle_terms(cps, obs, w.obstacle_linear_sign)
    j_obst = float(
        np.einsum("ij,ijk,ik->", q, h_blocks, q) + np.einsum("ij,ij->", f_sum, q)
    )
    return w.w_geo * j_geo + w.w_smooth * j_smooth + w.w_obst * j_obst + w.w_vel * j_vel


def optimize_control_points(
    cps: ControlPointSet,
    obs: ObstacleSet,
    w: SmoothingWeights,
    v_ref: float,
    v0: np.ndarray,
    heading: float | None = None,
) -> ControlPointSet:
    """Unique minimizer of the quadratic smoothing cost, solved in closed form."""
    n = cps.n_points
    q_vel = velocity_reference_points(cps, v_ref, v0, heading)
    d = _second_difference(n)
    dtd = d.T @ d
    base = 2.0 * (w.w_geo + w.w_vel) * np.eye(n) + 2.0 * w.w_smooth * dtd
    h_blocks, f_sum = _obstacle_terms(cps, obs, w.obstacle_linear_sign)
    # Stacked system over [x; y]: separable terms repeat per axis, obstacle
    # blocks couple the two coordinates of each point.
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = base
    m[n:, n:] = base
    idx = np.arange(n)
    m[idx, idx] += 2.0 * w.w_obst * h_blocks[:, 0, 0]
    m[idx, n + idx] += 2.0 * w.w_obst * h_blocks[:, 0, 1]
    m[n + idx, idx] += 2.0 * w.w_obst * h_blocks[:, 1, 0]
    m[n + idx, n + idx] += 2.0 * w.w_obst * h_blocks[:, 1, 1]
    rhs = np.concatenate(
        [
            2.0 * w.w_geo * cps.reference[:, 0] + 2.0 * w.w_vel * q_vel[:, 0]
            - w.w_obst * f_sum[:, 0],
            2.0 * w.w_geo * cps.reference[:, 1] + 2.0 * w.w_vel * q_vel[:, 1]
            - w.w_obst * f_sum[:, 1],
        ]
    )
    try:
        factor = scipy.linalg.cho_factor(m, check_finite=False)
        sol = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystem(
            "smoothing cost is not positive definite; check that w_geo > 0"
        ) from exc
    points = np.stack([sol[:n], sol[n:]], axis=1)
    return ControlPointSet(points=points, reference=cps.reference, dt=cps.dt)


def fit_cubic_spline(
    cps: ControlPointSet,
    v0: np.ndarray,
    trajectory_id: int,
    segment_ids: tuple[int, ...] = (),
) -> GuidanceSpline:
    """Per-axis cubic interpolation of the control points.

    The start is clamped to the robot's current velocity; the far end is left
    with zero curvature.
    """
    times = cps.times
    v0 = np.asarray(v0, dtype=float)
    coeffs = []
    for axis in range(2):
        cs = CubicSpline(
            times, cps.points[:, axis], bc_type=((1, float(v0[axis])), (2, 0.0))
        )
        coeffs.append(cs.c.T.copy())  # (n_intervals, 4) rows (a, b, c, d)
    return GuidanceSpline(
        coeffs_x=coeffs[0],
        coeffs_y=coeffs[1],
        knots=times.copy(),
        trajectory_id=trajectory_id,
        segment_ids=segment_ids,
    )


def smooth_trajectory(
    geo: GeometricTrajectory,
    obs: ObstacleSet,
    w: SmoothingWeights,
    v_ref: float,
    v0: np.ndarray,
    n_pts: int = 20,
    heading: float | None = None,
) -> GuidanceSpline:
    """Full smoothing pipeline for one geometric trajectory."""
    cps = sample_control_points(geo, n_pts)
    optimized = optimize_control_points(cps, obs, w, v_ref, v0, heading)
    return fit_cubic_spline(optimized, v0, geo.trajectory_id, geo.segment_ids)
