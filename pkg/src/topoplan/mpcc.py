"""Receding-horizon contouring controller with linearized collision constraints.

The solver performs sequential convexification over the input sequence: the
unicycle dynamics, the contouring objective and one half-space constraint per
obstacle per stage are linearized about the current rollout, the resulting
sparse QP is solved (OSQP workspace reused across iterations and control
steps), and the full step is applied. States are always produced by rolling
the exact dynamics, so returned trajectories satisfy them to machine
precision; feasibility is judged on those rollouts.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import osqp
import scipy.sparse as sparse

from .smoothing import GuidanceSpline
from .world import RobotInput, RobotLimits, RobotState, ObstacleSet, robot_step, wrap_angle

logger = logging.getLogger(__name__)

# Exact-penalty weights for the per-stage collision slack.
SLACK_LINEAR = 1e3
SLACK_QUADRATIC = 1e2

_OSQP_SETTINGS = dict(
    verbose=False,
    polishing=True,
    adaptive_rho=False,
    eps_abs=1e-6,
    eps_rel=1e-6,
    max_iter=20000,
)


class SolveError(RuntimeError):
    """The QP backend failed outright (not mere infeasibility)."""


@dataclass(frozen=True)
class MpccWeights:
    """Objective weights; the guided mode uses a strong contouring pull."""

    w_contour: float = 0.5
    w_lag: float = 0.01
    w_vel: float = 0.3
    w_acc: float = 0.05
    w_omega: float = 0.05

    @staticmethod
    def guided() -> "MpccWeights":
        return MpccWeights()

    @staticmethod
    def baseline() -> "MpccWeights":
        return MpccWeights(w_contour=0.01)


@dataclass(frozen=True)
class HalfspaceConstraint:
    """Linear collision constraint A^T p <= b at one stage for one obstacle."""

    normal: tuple[float, float]
    offset: float
    stage: int
    obstacle_id: int


class StraightReference:
    """Arc-length parameterized straight line with a constant speed profile."""

    def __init__(self, origin, direction, v_ref: float, length: float = 1e3):
        self.origin = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        self.direction = d / np.linalg.norm(d)
        self.v_ref = float(v_ref)
        self.length = float(length)

    def point_and_tangent(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        pts = self.origin[None, :] + np.clip(s, 0.0, self.length)[:, None] * self.direction
        tans = np.tile(self.direction, (len(s), 1))
        return pts, tans

    def project(self, xy: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(xy) - self.origin[None, :]
        return np.clip(rel @ self.direction, 0.0, self.length)

    def speed_at_time(self, t: np.ndarray) -> np.ndarray:
        return np.full(len(np.atleast_1d(t)), self.v_ref)


class SplineReference:
    """Arc-length view of a guidance spline via a dense lookup table."""

    def __init__(self, spline: GuidanceSpline, n_table: int = 240):
        self.spline = spline
        self._t = np.linspace(0.0, spline.duration, n_table)
        pos, vel, _ = spline.sample(self._t)
        self._pos = pos
        chord = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        self._s = np.concatenate([[0.0], np.cumsum(chord)])
        self.length = float(self._s[-1])
        speeds = np.linalg.norm(vel, axis=1)
        self._tangents = np.where(
            speeds[:, None] > 1e-9, vel / np.maximum(speeds, 1e-9)[:, None],
            np.array([[1.0, 0.0]]),
        )

    def point_and_tangent(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.clip(np.atleast_1d(np.asarray(s, dtype=float)), 0.0, self.length)
        t = np.interp(s, self._s, self._t)
        pos, vel, _ = self.spline.sample(t)
        speeds = np.linalg.norm(vel, axis=1)
        tans = np.where(
            speeds[:, None] > 1e-9, vel / np.maximum(speeds, 1e-9)[:, None],
            np.array([[1.0, 0.0]]),
        )
        return pos, tans

    def project(self, xy: np.ndarray) -> np.ndarray:
        """Arc length of the nearest reference point per query, chord-refined."""
        xy = np.atleast_2d(xy)
        d2 = np.square(self._pos[None, :, :] - xy[:, None, :]).sum(axis=2)
        idx = np.argmin(d2, axis=1)
        out = np.empty(len(xy))
        for i, (p, j) in enumerate(zip(xy, idx)):
            best = self._s[j]
            best_d2 = d2[i, j]
            for a in (j - 1, j):
                if a < 0 or a + 1 >= len(self._pos):
                    continue
                seg = self._pos[a + 1] - self._pos[a]
                denom = float(seg @ seg)
                if denom < 1e-18:
                    continue
                lam = float(np.clip((p - self._pos[a]) @ seg / denom, 0.0, 1.0))
                cand = self._pos[a] + lam * seg
                cd2 = float(np.sum((p - cand) ** 2))
                if cd2 < best_d2:
                    best_d2 = cd2
                    best = self._s[a] + lam * (self._s[a + 1] - self._s[a])
            out[i] = best
        return out

    def speed_at_time(self, t: np.ndarray) -> np.ndarray:
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), 0.0, self.spline.duration)
        _, vel, _ = self.spline.sample(t)
        return np.linalg.norm(vel, axis=1)


def contouring_errors(p, reference, s) -> tuple[float, float]:
    """Lag (tangential) and contour (normal) components of p's offset at progress s."""
    pos, tan = reference.point_and_tangent(np.array([s]))
    d = np.asarray(p, dtype=float) - pos[0]
    tangent = tan[0]
    normal = np.array([-tangent[1], tangent[0]])
    return float(tangent @ d), float(normal @ d)


def linearize_obstacle(
    p_prev, o_k, r: float, r_obs: float, prev_heading: float = 0.0
) -> tuple[np.ndarray, float]:
    """Half-space (A, b) with A^T p <= b excluding the inflated disc at o_k."""
    p = np.asarray(p_prev, dtype=float)
    o = np.asarray(o_k, dtype=float)
    d = o - p
    norm = float(np.hypot(d[0], d[1]))
    if norm < 1e-12:
        p = p - 1e-6 * np.array([math.cos(prev_heading), math.sin(prev_heading)])
        d = o - p
        norm = float(np.hypot(d[0], d[1]))
    a = d / norm
    b = float(a @ o) - (r + r_obs)
    return a, b


@dataclass(frozen=True)
class MpccProblem:
    """One receding-horizon problem instance."""

    initial_state: RobotState
    reference: StraightReference | SplineReference
    obstacles: ObstacleSet
    ref_speeds: np.ndarray  # (n_steps + 1,) per-stage speed targets
    n_steps: int = 40
    step: float = 0.05
    weights: MpccWeights = MpccWeights()
    limits: RobotLimits = RobotLimits()
    trust_radius: float = 0.5
    sqp_iterations: int = 10
    step_tolerance: float = 1e-4

    def __post_init__(self):
        horizon = self.n_steps * self.step
        ref_span = getattr(self.reference, "spline", None)
        if ref_span is not None and ref_span.duration < horizon - 1e-9:
            logger.warning(
                "reference spans %.2f s < horizon %.2f s; stage times clamp",
                ref_span.duration, horizon,
            )


@dataclass(frozen=True)
class MpccSolution:
    states: tuple[RobotState, ...]
    inputs: tuple[RobotInput, ...]
    stage_costs: tuple[float, ...]
    objective: float
    status: str  # "feasible" or "infeasible"
    iterations: int
    wall_time_ms: float
    constraints: tuple[HalfspaceConstraint, ...]
    progress: np.ndarray

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


class _QpStructure:
    """Fixed sparsity pattern and index maps for one (n_steps, n_obstacles) shape."""

    def __init__(self, n: int, n_obs: int):
        self.n = n
        self.n_obs = n_obs
        self.nx = 4 * n
        self.nu = 2 * n
        self.nvar = self.nx + self.nu + n
        self.off_u = self.nx
        self.off_s = self.nx + self.nu

        # objective pattern: per-stage position block (xx, xy, yy), theta and
        # v diagonals, input diagonals, slack diagonals (upper triangle only)
        p_rows, p_cols = [], []
        for k in range(n):
            ix = 4 * k
            p_rows += [ix, ix, ix + 1, ix + 2, ix + 3]
            p_cols += [ix, ix + 1, ix + 1, ix + 2, ix + 3]
        for j in range(self.nu):
            p_rows.append(self.off_u + j)
            p_cols.append(self.off_u + j)
        for k in range(n):
            p_rows.append(self.off_s + k)
            p_cols.append(self.off_s + k)
        self.p_pattern = (np.array(p_rows), np.array(p_cols))

        # constraint pattern
        a_rows, a_cols = [], []
        row = 0
        # dynamics: delta_x_{k+1} - A_k delta_x_k - B_k delta_u_k = 0
        self.dyn_entries = []  # positions of the -A_k varying entries
        for k in range(n):
            ixn = 4 * k  # delta x_{k+1} block
            for i in range(4):
                a_rows.append(row + i)
                a_cols.append(ixn + i)  # +1 on delta x_{k+1}
            if k > 0:
                ixp = 4 * (k - 1)
                for i in range(4):
                    for j in range(4):
                        a_rows.append(row + i)
                        a_cols.append(ixp + j)
            iu = self.off_u + 2 * k
            a_rows += [row + 2, row + 3]  # B: omega -> theta, a -> v
            a_cols += [iu + 1, iu + 0]
            row += 4
        self.n_dyn = row
        # obstacle rows: one per (stage, obstacle)
        self.obs_row0 = row
        for k in range(n):
            ix = 4 * k
            for _ in range(n_obs):
                a_rows += [row, row, row]
                a_cols += [ix, ix + 1, self.off_s + k]
                row += 1
        # slack nonnegativity
        self.slack_row0 = row
        for k in range(n):
            a_rows.append(row)
            a_cols.append(self.off_s + k)
            row += 1
        # input box
        self.input_row0 = row
        for j in range(self.nu):
            a_rows.append(row)
            a_cols.append(self.off_u + j)
            row += 1
        # speed box on v_k (k = 1..n)
        self.speed_row0 = row
        for k in range(n):
            a_rows.append(row)
            a_cols.append(4 * k + 3)
            row += 1
        # trust region on positions
        self.trust_row0 = row
        for k in range(n):
            a_rows += [row, row + 1]
            a_cols += [4 * k, 4 * k + 1]
            row += 2
        self.n_rows = row
        self.a_pattern = (np.array(a_rows), np.array(a_cols))

        self._p_perm, self.p_csc = self._permutation(self.p_pattern, self.nvar)
        self._a_perm, self.a_csc = self._permutation(
            self.a_pattern, self.nvar, n_rows=self.n_rows
        )

    def _permutation(self, pattern, nvar, n_rows=None):
        rows, cols = pattern
        shape = (n_rows if n_rows is not None else nvar, nvar)
        tracer = sparse.coo_matrix(
            (np.arange(len(rows), dtype=float), (rows, cols)), shape=shape
        ).tocsc()
        perm = tracer.data.astype(int)
        return perm, tracer

    def p_matrix(self, values: np.ndarray) -> np.ndarray:
        return values[self._p_perm]

    def a_matrix(self, values: np.ndarray) -> np.ndarray:
        return values[self._a_perm]


def rollout(
    x0: RobotState, inputs: np.ndarray, h: float, limits: RobotLimits
) -> list[RobotState]:
    states = [x0]
    for a, omega in inputs:
        states.append(robot_step(states[-1], RobotInput(float(a), float(omega)), h, limits))
    return states


def warm_start_from_guidance(
    spline: GuidanceSpline, x0: RobotState, n: int, h: float, limits: RobotLimits
) -> np.ndarray:
    """Input sequence reproducing the spline's speeds and headings, clamped."""
    t = np.minimum(np.arange(n + 1) * h, spline.duration)
    _, vel, _ = spline.sample(t)
    speeds = np.clip(np.linalg.norm(vel, axis=1), 0.0, limits.v_max)
    headings = np.arctan2(vel[:, 1], vel[:, 0])
    still = np.linalg.norm(vel, axis=1) < 1e-6
    headings[still] = x0.theta
    acc = np.clip(np.diff(speeds) / h, -limits.a_max, limits.a_max)
    dth = np.array([wrap_angle(d) for d in np.diff(headings)])
    omega = np.clip(dth / h, -limits.omega_max, limits.omega_max)
    return np.stack([acc, omega], axis=1)


class MpccPlanner:
    """Stateful solver: keeps the OSQP workspace and the last input sequence."""

    def __init__(self):
        self._osqp = None
        self._structure: _QpStructure | None = None
        self._last_inputs: np.ndarray | None = None

    def reset(self):
        self._osqp = None
        self._structure = None
        self._last_inputs = None

    def shifted_warm_start(self, n: int) -> np.ndarray:
        if self._last_inputs is None:
            return np.zeros((n, 2))
        shifted = np.vstack([self._last_inputs[1:], self._last_inputs[-1:]])
        return shifted[:n]

    def solve(
        self, problem: MpccProblem, warm_start: np.ndarray | GuidanceSpline | None = None
    ) -> MpccSolution:
        """Sequential convexification from the given warm start.

        `warm_start` may be an (n_steps, 2) input sequence, a guidance spline,
        or None (shifted previous solution, zeros on the first call).
        """
        t_begin = time.perf_counter()
        n, h = problem.n_steps, problem.step
        limits = problem.limits
        if isinstance(warm_start, GuidanceSpline):
            inputs = warm_start_from_guidance(
                warm_start, problem.initial_state, n, h, limits
            )
        elif warm_start is None:
            inputs = self.shifted_warm_start(n)
        else:
            inputs = np.array(warm_start, dtype=float).reshape(n, 2)
        inputs = np.clip(
            inputs,
            [-limits.a_max, -limits.omega_max],
            [limits.a_max, limits.omega_max],
        )
        states = rollout(problem.initial_state, inputs, h, limits)

        n_obs = problem.obstacles.n_obstacles
        if self._structure is None or (self._structure.n, self._structure.n_obs) != (
            n, n_obs,
        ):
            self._structure = _QpStructure(n, n_obs)
            self._osqp = None

        tracks = (
            problem.obstacles.tracks if n_obs else np.zeros((0, n + 1, 2))
        )
        radii = problem.obstacles.combined_radii if n_obs else np.zeros(0)

        best, states, inputs, iterations = self._sqp(
            problem, states, inputs, tracks, radii
        )
        if best is None:
            # The convexification can pin itself on an iterate that straddles
            # an obstacle; restart once from a pure braking sequence, which is
            # feasible whenever stopping short of every obstacle is.
            braking = np.zeros((n, 2))
            braking[:, 0] = -limits.a_max
            brake_states = rollout(problem.initial_state, braking, h, limits)
            best, states, inputs, extra = self._sqp(
                problem, brake_states, braking, tracks, radii
            )
            iterations += extra

        if best is not None:
            objective, inputs, states = best
            status = "feasible"
        else:
            feasible, objective = self._evaluate(problem, states, inputs, tracks, radii)
            status = "feasible" if feasible else "infeasible"
        self._last_inputs = inputs.copy()
        wall_ms = (time.perf_counter() - t_begin) * 1e3

        progress = problem.reference.project(
            np.array([[s.x, s.y] for s in states[1:]])
        )
        constraints = []
        for k in range(1, n + 1):
            for j in range(n_obs):
                a, b = linearize_obstacle(
                    (states[k].x, states[k].y), tracks[j, k],
                    problem.obstacles.robot_radius,
                    radii[j] - problem.obstacles.robot_radius,
                    prev_heading=states[k].theta,
                )
                constraints.append(
                    HalfspaceConstraint((float(a[0]), float(a[1])), b, k,
                                        problem.obstacles.predictions[j].obstacle_id)
                )
        stage_costs = self._stage_costs(problem, states, inputs, progress)
        return MpccSolution(
            states=tuple(states),
            inputs=tuple(RobotInput(float(a), float(o)) for a, o in inputs),
            stage_costs=tuple(stage_costs),
            objective=objective,
            status=status,
            iterations=iterations,
            wall_time_ms=wall_ms,
            constraints=tuple(constraints),
            progress=progress,
        )

    # internal pieces -----------------------------------------------------

    def _sqp(
        self,
        problem: MpccProblem,
        states: list[RobotState],
        inputs: np.ndarray,
        tracks: np.ndarray,
        radii: np.ndarray,
    ):
        """Run the convexification loop; returns (best feasible, last iterate)."""
        limits = problem.limits
        n, h = problem.n_steps, problem.step
        best: tuple[float, np.ndarray, list[RobotState]] | None = None
        feasible, objective = self._evaluate(problem, states, inputs, tracks, radii)
        if feasible:
            best = (objective, inputs.copy(), states)
        iterations = 0
        for _ in range(problem.sqp_iterations):
            iterations += 1
            delta = self._solve_qp(problem, states, inputs, tracks, radii)
            if delta is None:
                break
            du = delta[self._structure.off_u : self._structure.off_s].reshape(n, 2)
            inputs = np.clip(
                inputs + du,
                [-limits.a_max, -limits.omega_max],
                [limits.a_max, limits.omega_max],
            )
            states = rollout(problem.initial_state, inputs, h, limits)
            feasible, objective = self._evaluate(problem, states, inputs, tracks, radii)
            if feasible and (best is None or objective < best[0]):
                best = (objective, inputs.copy(), states)
            if float(np.abs(du).max()) < problem.step_tolerance:
                break
        return best, states, inputs, iterations

    def _stage_quantities(self, problem: MpccProblem, states: list[RobotState]):
        xy = np.array([[s.x, s.y] for s in states[1:]])
        s_prog = problem.reference.project(xy)
        ref_pos, tangents = problem.reference.point_and_tangent(s_prog)
        normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
        d = xy - ref_pos
        e_lag = np.einsum("ij,ij->i", tangents, d)
        e_con = np.einsum("ij,ij->i", normals, d)
        return xy, s_prog, tangents, normals, e_lag, e_con

    def _evaluate(
        self, problem, states, inputs, tracks, radii
    ) -> tuple[bool, float]:
        """Feasibility (true distances) and true objective of a rollout."""
        _, _, _, _, e_lag, e_con = self._stage_quantities(problem, states)
        w = problem.weights
        speeds = np.array([s.v for s in states[1:]])
        ref_v = problem.ref_speeds[1:]
        objective = float(
            w.w_contour * np.sum(e_con**2)
            + w.w_lag * np.sum(e_lag**2)
            + w.w_vel * np.sum((speeds - ref_v) ** 2)
            + w.w_acc * np.sum(inputs[:, 0] ** 2)
            + w.w_omega * np.sum(inputs[:, 1] ** 2)
        )
        if len(radii):
            xy = np.array([[s.x, s.y] for s in states[1:]])
            centers = tracks[:, 1 : len(states), :]  # (n_obs, n, 2)
            dist = np.linalg.norm(centers - xy[None, :, :], axis=2)
            feasible = bool(np.all(dist >= radii[:, None] - 1e-6))
        else:
            feasible = True
        return feasible, objective

    def _stage_costs(self, problem, states, inputs, s_prog) -> list[float]:
        w = problem.weights
        _, _, _, _, e_lag, e_con = self._stage_quantities(problem, states)
        speeds = np.array([s.v for s in states[1:]])
        ref_v = problem.ref_speeds[1:]
        costs = (
            w.w_contour * e_con**2
            + w.w_lag * e_lag**2
            + w.w_vel * (speeds - ref_v) ** 2
        )
        act = w.w_acc * inputs[:, 0] ** 2 + w.w_omega * inputs[:, 1] ** 2
        return list(costs + act)

    def _solve_qp(self, problem, states, inputs, tracks, radii) -> np.ndarray | None:
        st = self._structure
        n, h = problem.n_steps, problem.step
        w = problem.weights
        limits = problem.limits
        xy, s_prog, tangents, normals, e_lag, e_con = self._stage_quantities(
            problem, states
        )
        theta = np.array([s.theta for s in states])
        v = np.array([s.v for s in states])

        # objective values (same order the pattern was built in)
        p_vals = np.empty(5 * n + st.nu + n)
        q = np.zeros(st.nvar)
        nn = normals
        tt = tangents
        blk_xx = 2.0 * (w.w_contour * nn[:, 0] ** 2 + w.w_lag * tt[:, 0] ** 2)
        blk_xy = 2.0 * (w.w_contour * nn[:, 0] * nn[:, 1] + w.w_lag * tt[:, 0] * tt[:, 1])
        blk_yy = 2.0 * (w.w_contour * nn[:, 1] ** 2 + w.w_lag * tt[:, 1] ** 2)
        p_vals[0 : 5 * n : 5] = blk_xx
        p_vals[1 : 5 * n : 5] = blk_xy
        p_vals[2 : 5 * n : 5] = blk_yy
        p_vals[3 : 5 * n : 5] = 0.0  # theta carries no stage cost
        p_vals[4 : 5 * n : 5] = 2.0 * w.w_vel
        p_vals[5 * n : 5 * n + st.nu : 2] = 2.0 * w.w_acc
        p_vals[5 * n + 1 : 5 * n + st.nu : 2] = 2.0 * w.w_omega
        p_vals[5 * n + st.nu :] = 2.0 * SLACK_QUADRATIC

        grad_pos = (
            2.0 * w.w_contour * e_con[:, None] * nn + 2.0 * w.w_lag * e_lag[:, None] * tt
        )
        idx4 = np.arange(n) * 4
        q[idx4] = grad_pos[:, 0]
        q[idx4 + 1] = grad_pos[:, 1]
        q[idx4 + 3] = 2.0 * w.w_vel * (v[1:] - problem.ref_speeds[1:])
        q[st.off_u : st.off_s : 2] = 2.0 * w.w_acc * inputs[:, 0]
        q[st.off_u + 1 : st.off_s : 2] = 2.0 * w.w_omega * inputs[:, 1]
        q[st.off_s :] = SLACK_LINEAR

        # constraint values; the rollout clamps speed and wraps heading, so the
        # equality carries the defect between the affine model and the rollout
        a_vals = []
        lo = np.empty(st.n_rows)
        hi = np.empty(st.n_rows)
        for k in range(n):
            a_vals += [1.0, 1.0, 1.0, 1.0]
            sin_t, cos_t = math.sin(theta[k]), math.cos(theta[k])
            if k > 0:
                ak = [
                    -1.0, 0.0, v[k] * sin_t * h, -cos_t * h,
                    0.0, -1.0, -v[k] * cos_t * h, -sin_t * h,
                    0.0, 0.0, -1.0, 0.0,
                    0.0, 0.0, 0.0, -1.0,
                ]
                a_vals += ak
            a_vals += [-h, -h]  # omega -> theta, a -> v
            nxt = states[k + 1]
            defect = (
                states[k].x + v[k] * cos_t * h - nxt.x,
                states[k].y + v[k] * sin_t * h - nxt.y,
                theta[k] + inputs[k, 1] * h - nxt.theta,
                v[k] + inputs[k, 0] * h - nxt.v,
            )
            lo[4 * k : 4 * k + 4] = defect
            hi[4 * k : 4 * k + 4] = defect

        row = st.obs_row0
        if len(radii):
            for k in range(1, n + 1):
                for j in range(len(radii)):
                    a, b = linearize_obstacle(
                        xy[k - 1], tracks[j, k],
                        problem.obstacles.robot_radius,
                        radii[j] - problem.obstacles.robot_radius,
                        prev_heading=theta[k],
                    )
                    a_vals += [float(a[0]), float(a[1]), -1.0]
                    lo[row] = -np.inf
                    hi[row] = b - float(a @ xy[k - 1])
                    row += 1
        a_vals += [1.0] * n  # slack >= 0
        lo[st.slack_row0 : st.slack_row0 + n] = 0.0
        hi[st.slack_row0 : st.slack_row0 + n] = np.inf
        a_vals += [1.0] * st.nu
        lo[st.input_row0 : st.input_row0 + st.nu : 2] = -limits.a_max - inputs[:, 0]
        hi[st.input_row0 : st.input_row0 + st.nu : 2] = limits.a_max - inputs[:, 0]
        lo[st.input_row0 + 1 : st.input_row0 + st.nu : 2] = (
            -limits.omega_max - inputs[:, 1]
        )
        hi[st.input_row0 + 1 : st.input_row0 + st.nu : 2] = (
            limits.omega_max - inputs[:, 1]
        )
        a_vals += [1.0] * n  # speed box
        lo[st.speed_row0 : st.speed_row0 + n] = -v[1:]
        hi[st.speed_row0 : st.speed_row0 + n] = limits.v_max - v[1:]
        a_vals += [1.0] * (2 * n)  # trust region
        lo[st.trust_row0 : st.trust_row0 + 2 * n] = -problem.trust_radius
        hi[st.trust_row0 : st.trust_row0 + 2 * n] = problem.trust_radius

        a_vals = np.array(a_vals)
        p_data = st.p_matrix(p_vals)
        a_data = st.a_matrix(a_vals)
        if self._osqp is None:
            pm = st.p_csc.copy()
            pm.data = p_data.astype(float)
            am = st.a_csc.copy()
            am.data = a_data.astype(float)
            self._osqp = osqp.OSQP()
            self._osqp.setup(pm, q, am, lo, hi, **_OSQP_SETTINGS)
        else:
            self._osqp.update(Px=p_data, Ax=a_data)
            self._osqp.update(q=q, l=lo, u=hi)
        res = self._osqp.solve(raise_error=False)
        if res.info.status_val not in (1, 2):  # solved, solved inaccurate
            logger.warning("QP subproblem status: %s", res.info.status)
            return None
        return res.x


def solve(
    problem: MpccProblem,
    warm_start: np.ndarray | GuidanceSpline | None = None,
    planner: MpccPlanner | None = None,
) -> MpccSolution:
    """One-shot convenience wrapper around MpccPlanner.solve."""
    return (planner or MpccPlanner()).solve(problem, warm_start)
