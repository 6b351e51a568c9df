import itertools
import math

import numpy as np
import pytest
import scipy.optimize

from topoplan.prm import GeometricTrajectory
from topoplan.smoothing import (
    ControlPointSet,
    SingularSystem,
    SmoothingWeights,
    fit_cubic_spline,
    optimize_control_points,
    points_cost,
    sample_control_points,
    smooth_trajectory,
    spline_sample,
    velocity_reference_points,
)
from topoplan.topology import PiecewiseTrajectory
from topoplan.world import ObstacleSet, StateSpacePoint

from conftest import make_obstacle_set

EMPTY = ObstacleSet(predictions=(), robot_radius=0.5, horizon=2.0)


def geo_from(*pts, beta=1, segments=(1,)):
    return GeometricTrajectory(
        PiecewiseTrajectory([StateSpacePoint(*p) for p in pts]), segments, beta
    )


def random_instance(rng, n_pts=None, n_obs=None):
    """Randomized smoothing problem with obstacles near the path.

    Keeping obstacles within a couple of meters of the sampled path keeps the
    quadratic obstacle expansion (built around the reference points) in the
    regime it was designed for, and the total cost at a scale where
    finite-difference oracles are meaningful.
    """
    n_pts = n_pts or int(rng.integers(4, 21))
    n_obs = 0 if n_obs == 0 else (n_obs or int(rng.integers(0, 9)))
    duration = float(rng.uniform(2.0, 6.0))
    half_x = float(rng.uniform(2, 4))
    mid = (
        half_x * float(rng.uniform(-0.4, 0.4)),
        float(rng.uniform(-1.5, 1.5)),
        duration * float(rng.uniform(0.3, 0.7)),
    )
    geo = geo_from(
        (-half_x, rng.uniform(-1, 1), 0), mid, (half_x, rng.uniform(-1, 1), duration)
    )
    specs = []
    for _ in range(n_obs):
        t_on = float(rng.uniform(0, duration))
        anchor = geo.trajectory.eval_time([t_on])[0]
        specs.append(
            (
                (anchor[0] + float(rng.uniform(-1.5, 1.5)),
                 anchor[1] + float(rng.uniform(-1.5, 1.5))),
                (float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5))),
                float(rng.uniform(0.2, 0.5)),
            )
        )
    obs = (
        make_obstacle_set(specs, robot_radius=0.4, horizon=duration, h=duration / 40)
        if specs
        else ObstacleSet(predictions=(), robot_radius=0.4, horizon=duration)
    )
    w = SmoothingWeights(
        w_geo=float(rng.uniform(5, 40)),
        w_smooth=float(rng.uniform(0, 20)),
        w_obst=float(rng.uniform(0, 2)),
        w_vel=float(rng.uniform(0, 0.5)),
    )
    v0 = rng.uniform(-1, 1, 2)
    cps = sample_control_points(geo, n_pts)
    return cps, obs, w, v0


def points_cost_grad(flat, cps, obs, w, qv):
    """Analytic gradient of points_cost, differentiated term by term.

    Written directly from the cost formulas (not from the solver's stacked
    system) so the iterative minimizer below stays an independent oracle.
    """
    q = flat.reshape(cps.n_points, 2)
    grad = 2.0 * w.w_geo * (q - cps.reference) + 2.0 * w.w_vel * (q - qv)
    r = q[:-2] - 2.0 * q[1:-1] + q[2:]
    grad[:-2] += 2.0 * w.w_smooth * r
    grad[1:-1] += -4.0 * w.w_smooth * r
    grad[2:] += 2.0 * w.w_smooth * r
    if obs.n_obstacles:
        step = obs.predictions[0].step
        n_pred = len(obs.predictions[0].positions) - 1
        radii = np.array([p.radius for p in obs.predictions]) + obs.robot_radius
        for i in range(cps.n_points):
            k = min(max(int(round(i * cps.dt / step)), 0), n_pred)
            for j, pred in enumerate(obs.predictions):
                o = pred.positions[k]
                a = cps.reference[i] - o
                f = -w.obstacle_linear_sign * (1.0 + radii[j]) * a - a * (a @ o)
                grad[i] += w.w_obst * (a * (a @ q[i]) + f)
    return grad.ravel()


def minimize_points_cost(cps, obs, w, qv):
    """Iterative (conjugate-gradient) minimizer of the literal cost formulas."""
    res = scipy.optimize.minimize(
        points_cost,
        cps.reference.ravel(),
        jac=points_cost_grad,
        args=(cps, obs, w, qv),
        method="CG",
        tol=1e-18,
        options={"maxiter": 10000},
    )
    return res.x


class TestSampleControlPoints:
    def test_uniform_sampling_straight(self):
        geo = geo_from((0, 0, 0), (4, 0, 2))
        cps = sample_control_points(geo, 5)
        np.testing.assert_allclose(
            cps.reference, [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)], atol=1e-12
        )
        assert cps.dt == pytest.approx(0.5)

    def test_two_points_endpoints_only(self):
        geo = geo_from((0, 0, 0), (4, 2, 2))
        cps = sample_control_points(geo, 2)
        np.testing.assert_allclose(cps.reference, [(0, 0), (4, 2)])

    def test_kinked_path_interpolated(self):
        geo = geo_from((0, 0, 0), (2, 2, 1), (4, 0, 2))
        cps = sample_control_points(geo, 5)
        np.testing.assert_allclose(
            cps.reference, [(0, 0), (1, 1), (2, 2), (3, 1), (4, 0)], atol=1e-12
        )


class TestVelocityReference:
    def test_hand_applied_recurrence(self):
        cps = ControlPointSet(
            points=np.array([(0.0, 0), (1, 0), (2, 0)]),
            reference=np.array([(0.0, 0), (1, 0), (2, 0)]),
            dt=1.0,
        )
        qv = velocity_reference_points(cps, v_ref=2.0, v0=np.zeros(2))
        np.testing.assert_allclose(qv, [(0, 0), (2, 0), (4, 0)])

    def test_fixed_point_at_reference_speed(self):
        cps = ControlPointSet(
            points=np.array([(0.0, 0), (1, 0), (2, 0)]),
            reference=np.array([(0.0, 0), (1, 0), (2, 0)]),
            dt=1.0,
        )
        qv = velocity_reference_points(cps, v_ref=1.0, v0=np.zeros(2))
        np.testing.assert_allclose(qv, cps.reference)

    def test_right_angle_path_stretches_steps(self):
        cps = ControlPointSet(
            points=np.array([(0.0, 0), (1, 0), (1, 1)]),
            reference=np.array([(0.0, 0), (1, 0), (1, 1)]),
            dt=0.5,
        )
        qv = velocity_reference_points(cps, v_ref=3.0, v0=np.zeros(2))
        np.testing.assert_allclose(qv, [(0, 0), (1.5, 0), (1.5, 1.5)])

    def test_initial_direction_from_robot_velocity(self):
        cps = ControlPointSet(
            points=np.array([(0.0, 0), (1, 0)]),
            reference=np.array([(0.0, 0), (1, 0)]),
            dt=1.0,
        )
        qv = velocity_reference_points(cps, v_ref=2.0, v0=np.array([0.0, 1.0]))
        np.testing.assert_allclose(qv, [(0, 0), (0, 2)])

    def test_coincident_points_reuse_direction(self):
        cps = ControlPointSet(
            points=np.array([(0.0, 0), (1, 0), (1, 0), (2, 0)]),
            reference=np.array([(0.0, 0), (1, 0), (1, 0), (2, 0)]),
            dt=1.0,
        )
        qv = velocity_reference_points(cps, v_ref=1.0, v0=np.zeros(2))
        np.testing.assert_allclose(qv, [(0, 0), (1, 0), (2, 0), (3, 0)])


class TestOptimize:
    def test_geo_only_returns_reference(self):
        geo = geo_from((0, 0, 0), (2, 1, 1), (4, 0, 2))
        cps = sample_control_points(geo, 8)
        w = SmoothingWeights(w_geo=1, w_smooth=0, w_obst=0, w_vel=0)
        out = optimize_control_points(cps, EMPTY, w, 2.0, np.zeros(2))
        np.testing.assert_allclose(out.points, cps.reference, atol=1e-12)

    def test_finite_difference_gradient_vanishes(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            cps, obs, w, v0 = random_instance(rng)
            qv = velocity_reference_points(cps, 2.0, v0)
            out = optimize_control_points(cps, obs, w, 2.0, v0)
            flat = out.points.ravel()
            step = 1e-6
            grad = np.empty_like(flat)
            for k in range(len(flat)):
                hi = flat.copy()
                lo = flat.copy()
                hi[k] += step
                lo[k] -= step
                grad[k] = (
                    points_cost(hi, cps, obs, w, qv) - points_cost(lo, cps, obs, w, qv)
                ) / (2 * step)
            assert np.max(np.abs(grad)) < 1e-6

    def test_collinear_stays_collinear(self):
        geo = geo_from((0, 0, 0), (4, 2, 2))
        cps = sample_control_points(geo, 6)
        w = SmoothingWeights(w_geo=1, w_smooth=1, w_obst=0, w_vel=0)
        out = optimize_control_points(cps, EMPTY, w, 2.0, np.zeros(2))
        d = np.diff(out.points, axis=0)
        cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
        np.testing.assert_allclose(cross, 0.0, atol=1e-9)

    def test_matches_numerical_minimizer(self):
        rng = np.random.default_rng(33)
        for _ in range(12):
            cps, obs, w, v0 = random_instance(rng)
            qv = velocity_reference_points(cps, 2.0, v0)
            out = optimize_control_points(cps, obs, w, 2.0, v0)
            res = minimize_points_cost(cps, obs, w, qv)
            np.testing.assert_allclose(out.points.ravel(), res, atol=1e-7)

    def test_cost_never_increases_from_reference(self):
        rng = np.random.default_rng(44)
        for _ in range(20):
            cps, obs, w, v0 = random_instance(rng)
            qv = velocity_reference_points(cps, 2.0, v0)
            out = optimize_control_points(cps, obs, w, 2.0, v0)
            assert points_cost(out.points, cps, obs, w, qv) <= points_cost(
                cps.reference, cps, obs, w, qv
            ) + 1e-9

    def test_weight_scaling_invariance(self):
        rng = np.random.default_rng(55)
        cps, obs, w, v0 = random_instance(rng)
        out1 = optimize_control_points(cps, obs, w, 2.0, v0)
        scaled = SmoothingWeights(
            w_geo=3.7 * w.w_geo,
            w_smooth=3.7 * w.w_smooth,
            w_obst=3.7 * w.w_obst,
            w_vel=3.7 * w.w_vel,
        )
        out2 = optimize_control_points(cps, obs, scaled, 2.0, v0)
        np.testing.assert_allclose(out1.points, out2.points, atol=1e-9)

    def test_obstacles_ignored_when_weight_zero(self):
        rng = np.random.default_rng(66)
        cps, obs, w, v0 = random_instance(rng)
        w0 = SmoothingWeights(w_geo=w.w_geo, w_smooth=w.w_smooth, w_obst=0.0,
                              w_vel=w.w_vel)
        a = optimize_control_points(cps, obs, w0, 2.0, v0)
        empty = ObstacleSet(predictions=(), robot_radius=0.4, horizon=obs.horizon)
        b = optimize_control_points(cps, empty, w0, 2.0, v0)
        np.testing.assert_allclose(a.points, b.points)

    def test_axis_symmetry(self):
        geo = geo_from((0, 0, 0), (2, 1, 1), (5, -1, 2))
        cps = sample_control_points(geo, 10)
        w = SmoothingWeights(w_geo=10, w_smooth=5, w_obst=0, w_vel=0.2)
        out = optimize_control_points(cps, EMPTY, w, 2.0, np.array([1.0, 0.5]))
        swapped = ControlPointSet(
            points=cps.points[:, ::-1].copy(),
            reference=cps.reference[:, ::-1].copy(),
            dt=cps.dt,
        )
        out_swapped = optimize_control_points(
            swapped, EMPTY, w, 2.0, np.array([0.5, 1.0])
        )
        np.testing.assert_allclose(out.points, out_swapped.points[:, ::-1], atol=1e-10)

    def test_singular_system_raises(self):
        geo = geo_from((0, 0, 0), (4, 0, 2))
        cps = sample_control_points(geo, 6)
        w = SmoothingWeights(w_geo=0.0, w_smooth=1.0, w_obst=0.0, w_vel=0.0)
        with pytest.raises(SingularSystem):
            optimize_control_points(cps, EMPTY, w, 2.0, np.zeros(2))


class TestCubicSpline:
    def _spline(self, n_pts=8, v0=(1.0, -0.5)):
        rng = np.random.default_rng(3)
        pts = np.cumsum(rng.uniform(-1, 1, (n_pts, 2)), axis=0)
        cps = ControlPointSet(points=pts, reference=pts, dt=0.3)
        return cps, fit_cubic_spline(cps, np.array(v0), trajectory_id=1)

    def test_interpolates_control_points(self):
        cps, spline = self._spline()
        pos, _, _ = spline.sample(cps.times)
        assert np.max(np.abs(pos - cps.points)) < 1e-9

    def test_initial_velocity_boundary(self):
        v0 = np.array([1.3, -0.7])
        cps, spline = self._spline(v0=tuple(v0))
        _, vel, _ = spline.sample([0.0])
        assert np.max(np.abs(vel[0] - v0)) < 1e-9

    def test_natural_end(self):
        cps, spline = self._spline()
        _, _, acc = spline.sample([spline.duration])
        assert np.max(np.abs(acc[0])) < 1e-8

    def test_c2_continuity_at_knots(self):
        cps, spline = self._spline(n_pts=12)
        eps = 1e-7
        for knot in spline.knots[1:-1]:
            _, _, acc_lo = spline.sample([knot - eps])
            _, _, acc_hi = spline.sample([knot + eps])
            scale = max(1.0, np.max(np.abs(acc_lo)))
            assert np.max(np.abs(acc_hi - acc_lo)) / scale < 1e-5

    def test_linear_data_zero_acceleration(self):
        times = np.arange(6) * 0.5
        pts = np.stack([2.0 * times, -1.0 * times], axis=1)
        cps = ControlPointSet(points=pts, reference=pts, dt=0.5)
        spline = fit_cubic_spline(cps, np.array([2.0, -1.0]), trajectory_id=1)
        t = np.linspace(0, spline.duration, 50)
        _, _, acc = spline.sample(t)
        assert np.max(np.abs(acc)) < 1e-9

    def test_velocity_matches_finite_difference(self):
        cps, spline = self._spline(n_pts=10)
        eps = 1e-6
        for t in cps.times[1:-1]:
            pos_hi, _, _ = spline.sample([t + eps])
            pos_lo, _, _ = spline.sample([t - eps])
            fd = (pos_hi[0] - pos_lo[0]) / (2 * eps)
            _, vel, _ = spline.sample([t])
            assert np.max(np.abs(vel[0] - fd)) < 1e-5

    def test_knot_positions_equal_control_points(self):
        cps, spline = self._spline()
        pos, _, _ = spline_sample(spline, spline.knots)
        np.testing.assert_allclose(pos, cps.points, atol=1e-9)

    def test_out_of_range_clamps_with_warning(self, caplog):
        _, spline = self._spline()
        with caplog.at_level("WARNING"):
            pos, _, _ = spline.sample([spline.duration + 1.0])
        end, _, _ = spline.sample([spline.duration])
        np.testing.assert_allclose(pos, end)
        assert "clamp" in caplog.text


def test_smooth_trajectory_pipeline_runs():
    geo = geo_from((0, 0, 0), (6, 1.5, 3), (12, 0, 6), beta=4, segments=(2,))
    obs = make_obstacle_set([((6.0, 0.0), (0.0, 0.0), 0.5)], horizon=6.0)
    spline = smooth_trajectory(geo, obs, SmoothingWeights(), 2.0, np.array([2.0, 0.0]))
    assert spline.trajectory_id == 4
    assert spline.segment_ids == (2,)
    assert spline.duration == pytest.approx(6.0)
