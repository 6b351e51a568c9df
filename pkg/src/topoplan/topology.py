"""Topology comparison of space-time trajectories.

Two trajectories sharing both endpoints are considered equivalent when every
straight segment connecting same-parameter points on them is collision-free
(checked at discrete parameter values). An oversampled variant serves as an
independent oracle in tests, and a side-of-passing signature gives a second,
geometry-based oracle for single-obstacle scenes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import (
    DEFAULT_TIME_SCALE,
    ObstaclePrediction,
    ObstacleSet,
    StateSpacePoint,
    scaled_distance,
    segments_free_mask,
)


class EndpointMismatch(ValueError):
    """Raised when two trajectories do not share both endpoints."""


class PiecewiseTrajectory:
    """Polyline through space-time, parameterized by normalized scaled arc length.

    Waypoint times must be nondecreasing. The parameter s in [0, 1] advances
    proportionally to cumulative arc length in the (x, y, t*time_scale) metric,
    so equal parameters on two trajectories have advanced comparably.
    """

    def __init__(self, waypoints, time_scale: float = DEFAULT_TIME_SCALE):
        pts = np.asarray(
            [
                (w.x, w.y, w.t) if isinstance(w, StateSpacePoint) else tuple(w)
                for w in waypoints
            ],
            dtype=float,
        )
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 3:
            raise ValueError("need at least two (x, y, t) waypoints")
        if np.any(np.diff(pts[:, 2]) < 0.0):
            raise ValueError("waypoint times must be nondecreasing")
        self.points = pts
        self.time_scale = time_scale
        scaled = pts.copy()
        scaled[:, 2] *= time_scale
        seg = np.linalg.norm(np.diff(scaled, axis=0), axis=1)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self._cum[-1])

    @property
    def start(self) -> StateSpacePoint:
        return StateSpacePoint(*self.points[0])

    @property
    def end(self) -> StateSpacePoint:
        return StateSpacePoint(*self.points[-1])

    def eval(self, s) -> np.ndarray:
        """Points (x, y, t) at parameter values s in [0, 1]; shape (len(s), 3)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.length == 0.0:
            return np.tile(self.points[0], (len(s), 1))
        target = np.clip(s, 0.0, 1.0) * self.length
        idx = np.clip(np.searchsorted(self._cum, target, side="right") - 1, 0,
                      len(self.points) - 2)
        seg_len = self._cum[idx + 1] - self._cum[idx]
        frac = np.where(seg_len > 0.0, (target - self._cum[idx]) / np.where(seg_len > 0, seg_len, 1.0), 0.0)
        return self.points[idx] + frac[:, None] * (self.points[idx + 1] - self.points[idx])

    def eval_time(self, t) -> np.ndarray:
        """Spatial positions at the given times, linearly interpolated; shape (len(t), 2)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        knots = self.points[:, 2]
        x = np.interp(t, knots, self.points[:, 0])
        y = np.interp(t, knots, self.points[:, 1])
        return np.stack([x, y], axis=1)


@dataclass(frozen=True)
class UvdConfig:
    """Discretization of the equivalence test."""

    num_samples: int = 20
    segment_resolution: float = 0.1
    time_scale: float = DEFAULT_TIME_SCALE

    def __post_init__(self):
        if self.num_samples < 2:
            raise ValueError("num_samples must be >= 2")


DEFAULT_UVD = UvdConfig()


def _check_endpoints(t1: PiecewiseTrajectory, t2: PiecewiseTrajectory, time_scale: float):
    d0 = scaled_distance(t1.start, t2.start, time_scale)
    d1 = scaled_distance(t1.end, t2.end, time_scale)
    if d0 > 1e-6 or d1 > 1e-6:
        raise EndpointMismatch(
            f"endpoint offsets {d0:.2e}/{d1:.2e} exceed 1e-6 in the scaled metric"
        )


def uvd_equivalent(
    t1: PiecewiseTrajectory,
    t2: PiecewiseTrajectory,
    obs: ObstacleSet,
    cfg: UvdConfig = DEFAULT_UVD,
) -> bool:
    """True iff all sampled connecting segments between t1 and t2 are collision-free."""
    _check_endpoints(t1, t2, cfg.time_scale)
    s = np.linspace(0.0, 1.0, cfg.num_samples)
    p1 = t1.eval(s)
    p2 = t2.eval(s)
    return bool(
        segments_free_mask(p1, p2, obs, cfg.segment_resolution, cfg.time_scale).all()
    )


def uvd_oracle(
    t1: PiecewiseTrajectory,
    t2: PiecewiseTrajectory,
    obs: ObstacleSet,
    cfg: UvdConfig = DEFAULT_UVD,
) -> bool:
    """Fine-resolution re-evaluation of uvd_equivalent (20x samples, ds/20)."""
    fine = UvdConfig(
        num_samples=cfg.num_samples * 20,
        segment_resolution=cfg.segment_resolution / 20.0,
        time_scale=cfg.time_scale,
    )
    return uvd_equivalent(t1, t2, obs, fine)


def passing_signature(xy: np.ndarray, t: np.ndarray, pred: ObstaclePrediction) -> int:
    """Side on which a spatial track passes one obstacle.

    Returns the sign of the 2-D cross product between the obstacle-to-robot
    offset and their relative velocity at the point of closest approach
    (+1 left, -1 right, 0 degenerate).
    """
    xy = np.asarray(xy, dtype=float)
    t = np.asarray(t, dtype=float)
    n_seg = len(pred.positions) - 1
    k = t / pred.step
    idx = np.clip(k.astype(int), 0, n_seg - 1)
    frac = np.clip(k - idx, 0.0, 1.0)[:, None]
    centers = pred.positions[idx] + frac * (pred.positions[idx + 1] - pred.positions[idx])
    rel = xy - centers
    i = int(np.argmin(np.linalg.norm(rel, axis=1)))
    j = min(i + 1, len(t) - 1) if i + 1 < len(t) else i
    if j == i:
        i, j = max(0, i - 1), i
    dt = t[j] - t[i]
    if dt <= 0.0:
        return 0
    rel_vel = (rel[j] - rel[i]) / dt
    cross = rel[i, 0] * rel_vel[1] - rel[i, 1] * rel_vel[0]
    if cross > 0.0:
        return 1
    if cross < 0.0:
        return -1
    return 0


def trajectory_signature(
    traj: PiecewiseTrajectory, pred: ObstaclePrediction, n_samples: int = 400
) -> int:
    """passing_signature of a space-time trajectory, sampled densely along s."""
    pts = traj.eval(np.linspace(0.0, 1.0, n_samples))
    return passing_signature(pts[:, :2], pts[:, 2], pred)
