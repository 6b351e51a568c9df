"""Sparse visibility roadmap over the space-time workspace.

The graph alternates between guard nodes (mutually invisible anchors) and
connector nodes (each linking exactly two guards). Every connector carries a
persistent segment ID identifying the topology class of its guard-connector-
guard segment; whole start-to-goal trajectories carry a trajectory ID derived
from their segment-ID set. Reintroducing the previous graph's nodes at each
planning iteration keeps both kinds of IDs stable over time.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .topology import DEFAULT_UVD, PiecewiseTrajectory, UvdConfig, uvd_equivalent
from .world import (
    ObstacleSet,
    RobotState,
    StateSpacePoint,
    point_free,
    segment_free,
    segments_free_mask,
)

logger = logging.getLogger(__name__)


class NoTrajectoryFound(RuntimeError):
    """No start-to-goal path exists in the current graph."""


class GoalOccupied(RuntimeError):
    """The requested goal state collides with a predicted obstacle."""


@dataclass(frozen=True)
class GuardNode:
    id: int
    state: StateSpacePoint
    kind: str  # "start", "goal" or "interior"


@dataclass(frozen=True)
class ConnectorNode:
    id: int
    state: StateSpacePoint
    guards: tuple[int, int]
    segment_id: int


@dataclass(frozen=True)
class GeometricTrajectory:
    """A start-to-goal polyline through the graph with its topology identifiers."""

    trajectory: PiecewiseTrajectory
    segment_ids: tuple[int, ...]
    trajectory_id: int

    @property
    def segment_set(self) -> frozenset[int]:
        return frozenset(self.segment_ids)


@dataclass(frozen=True)
class SamplingArc:
    """Forward-directed sampling region respecting speed and acceleration limits."""

    v_min: float
    v_max: float
    a_max: float
    heading_halfwidth: float
    origin: RobotState
    horizon: tuple[int, float]  # (n_steps, step)

    def __post_init__(self):
        if self.v_min < 0 or self.v_min > self.v_max:
            raise ValueError("need 0 <= v_min <= v_max")

    @property
    def duration(self) -> float:
        n, h = self.horizon
        return n * h


@dataclass(frozen=True)
class PrmConfig:
    """Discretization, metric and bounds shared by graph construction."""

    ds: float = 0.1
    time_scale: float = 2.0
    uvd: UvdConfig = DEFAULT_UVD
    v_max: float = 2.5
    max_trajectories: int = 8


@dataclass(frozen=True)
class PrmLimits:
    max_samples: int = 120
    time_budget_ms: float | None = None


@dataclass
class BuildDiagnostics:
    samples: int = 0
    occupied: int = 0
    guards_added: int = 0
    connectors_added: int = 0
    replaced: int = 0
    discarded_visibility: int = 0
    discarded_connection: int = 0
    discarded_duplicate: int = 0


class GuidanceGraph:
    """Mutable guard/connector graph; single-writer during construction."""

    def __init__(self, time_scale: float = 2.0):
        self.guards: list[GuardNode] = []
        self.connectors: list[ConnectorNode] = []
        self.next_segment_id = 1
        self.time_scale = time_scale
        self._next_node_id = 0
        self._guard_states = np.zeros((0, 3))
        self._pair_slots: dict[tuple[int, int], list[int]] = {}

    def add_guard(self, state: StateSpacePoint, kind: str = "interior") -> GuardNode:
        node = GuardNode(self._next_node_id, state, kind)
        self._next_node_id += 1
        self.guards.append(node)
        self._guard_states = np.vstack([self._guard_states, state.as_array()])
        return node

    def fresh_segment_id(self) -> int:
        sid = self.next_segment_id
        self.next_segment_id += 1
        return sid

    def add_connector(self, state: StateSpacePoint, guards: tuple[int, int],
                      segment_id: int) -> ConnectorNode:
        node = ConnectorNode(self._next_node_id, state, guards, segment_id)
        self._next_node_id += 1
        self._pair_slots.setdefault(guards, []).append(len(self.connectors))
        self.connectors.append(node)
        return node

    def replace_connector(self, slot: int, state: StateSpacePoint) -> ConnectorNode:
        old = self.connectors[slot]
        node = ConnectorNode(self._next_node_id, state, old.guards, old.segment_id)
        self._next_node_id += 1
        self.connectors[slot] = node
        return node

    def connectors_between(self, guards: tuple[int, int]) -> list[int]:
        return self._pair_slots.get(guards, [])

    @property
    def guard_states(self) -> np.ndarray:
        return self._guard_states


def sample_state(arc: SamplingArc, rng: np.random.Generator) -> StateSpacePoint:
    """Draw (x, y, t) with t ~ U(0, T] inside the reachable annulus sector."""
    t = arc.duration * (1.0 - rng.random())
    v0 = arc.origin.v
    r_hi = min(arc.v_max * t, v0 * t + 0.5 * arc.a_max * t * t)
    r_lo = max(0.0, arc.v_min * t, v0 * t - 0.5 * arc.a_max * t * t)
    radius = rng.uniform(r_lo, r_hi)
    bearing = arc.origin.theta + rng.uniform(-arc.heading_halfwidth, arc.heading_halfwidth)
    return StateSpacePoint(
        arc.origin.x + radius * math.cos(bearing),
        arc.origin.y + radius * math.sin(bearing),
        t,
    )


def connection_valid(a: StateSpacePoint, b: StateSpacePoint, v_max: float) -> bool:
    """Dynamic feasibility of the hop a -> b: time advances, speed within v_max."""
    dt = b.t - a.t
    if dt <= 0.0:
        return False
    return math.hypot(b.x - a.x, b.y - a.y) / dt <= v_max


def visible_guards(
    x: StateSpacePoint, graph: GuidanceGraph, obs: ObstacleSet, cfg: PrmConfig
) -> list[GuardNode]:
    """Guards reachable from x by a collision-free straight segment."""
    if not graph.guards:
        return []
    starts = np.tile(x.as_array(), (len(graph.guards), 1))
    free = segments_free_mask(starts, graph.guard_states, obs, cfg.ds, cfg.time_scale)
    return [g for g, ok in zip(graph.guards, free) if ok]


def _ordered_pair(a: GuardNode, b: GuardNode) -> tuple[GuardNode, GuardNode]:
    # Ascending time (ties by id) so the connector's hop times can be checked
    # consistently and path construction is deterministic.
    if (a.state.t, a.id) <= (b.state.t, b.id):
        return a, b
    return b, a


def _three_point_path(
    g0: GuardNode, x: StateSpacePoint, g1: GuardNode, time_scale: float
) -> PiecewiseTrajectory:
    return PiecewiseTrajectory([g0.state, x, g1.state], time_scale)


def insert_sample(
    x: StateSpacePoint,
    graph: GuidanceGraph,
    obs: ObstacleSet,
    cfg: PrmConfig,
    reintroduced_segment_id: int | None = None,
    diag: BuildDiagnostics | None = None,
) -> str:
    """Insert one collision-free sample following the guard/connector rules.

    Outcomes: a sample seeing no guard becomes a guard; a sample seeing
    exactly two guards with dynamically feasible hops becomes a connector,
    either replacing a same-class connector when shorter (inheriting its
    segment ID) or adding a new class; anything else is discarded.
    """
    vis = visible_guards(x, graph, obs, cfg)
    if len(vis) == 0:
        graph.add_guard(x, "interior")
        if diag:
            diag.guards_added += 1
        return "guard"
    if len(vis) != 2:
        if diag:
            diag.discarded_visibility += 1
        return "discarded"
    g0, g1 = _ordered_pair(vis[0], vis[1])
    if not connection_valid(g0.state, x, cfg.v_max) or not connection_valid(
        x, g1.state, cfg.v_max
    ):
        if diag:
            diag.discarded_connection += 1
        return "discarded"
    pair = (g0.id, g1.id)
    path = _three_point_path(g0, x, g1, cfg.time_scale)
    for slot in graph.connectors_between(pair):
        other = graph.connectors[slot]
        other_path = _three_point_path(g0, other.state, g1, cfg.time_scale)
        if uvd_equivalent(path, other_path, obs, cfg.uvd):
            if path.length < other_path.length:
                graph.replace_connector(slot, x)
                if diag:
                    diag.replaced += 1
                return "replaced"
            if diag:
                diag.discarded_duplicate += 1
            return "discarded"
    sid = (
        reintroduced_segment_id
        if reintroduced_segment_id is not None
        else graph.fresh_segment_id()
    )
    graph.next_segment_id = max(graph.next_segment_id, sid + 1)
    graph.add_connector(x, pair, sid)
    if diag:
        diag.connectors_added += 1
    return "connector"


def reintroduce(
    prev: GuidanceGraph,
    h: float,
    arc: SamplingArc,
    prev_trajectories: tuple[GeometricTrajectory, ...] = (),
) -> list[tuple[StateSpacePoint, int | None]]:
    """Previous nodes shifted one control period back in time, IDs attached.

    Connectors come first so their carried segment IDs claim their topology
    classes before plain guards or fresh samples can. Nodes whose time would
    drop to zero or below are resampled halfway along a previous trajectory
    containing their segment (and dropped if there is none).
    """
    by_segment: dict[int, GeometricTrajectory] = {}
    for traj in prev_trajectories:
        for sid in traj.segment_ids:
            by_segment.setdefault(sid, traj)
    out: list[tuple[StateSpacePoint, int | None]] = []
    horizon = arc.duration
    for c in prev.connectors:
        t_new = c.state.t - h
        if t_new > 0.0:
            out.append((StateSpacePoint(c.state.x, c.state.y, min(t_new, horizon)),
                        c.segment_id))
            continue
        traj = by_segment.get(c.segment_id)
        if traj is None:
            continue
        half = traj.trajectory.eval(0.5)[0]
        t_half = half[2] - h
        if t_half > 0.0:
            out.append((StateSpacePoint(half[0], half[1], min(t_half, horizon)),
                        c.segment_id))
    for g in prev.guards:
        t_new = g.state.t - h
        if t_new > 0.0:
            out.append((StateSpacePoint(g.state.x, g.state.y, min(t_new, horizon)), None))
    return out


def build_graph(
    obs: ObstacleSet,
    start: StateSpacePoint,
    goal: StateSpacePoint,
    arc: SamplingArc,
    rng: np.random.Generator,
    prev: GuidanceGraph | None = None,
    prev_trajectories: tuple[GeometricTrajectory, ...] = (),
    limits: PrmLimits = PrmLimits(),
    cfg: PrmConfig = PrmConfig(),
    diag: BuildDiagnostics | None = None,
) -> GuidanceGraph:
    """Construct the visibility roadmap for one planning iteration.

    Start and goal become guards first; all previous-graph nodes are
    reintroduced before fresh sampling. The loop stops at the sample budget or
    the optional wall-clock budget (leave the latter unset for reproducible
    runs).
    """
    if abs(start.t) > 1e-9 or abs(goal.t - arc.duration) > 1e-9:
        raise ValueError("start must be at t=0 and goal at t=T")
    if not point_free(goal, obs):
        raise GoalOccupied(f"goal {goal} collides with a predicted obstacle")
    graph = GuidanceGraph(cfg.time_scale)
    graph.add_guard(start, "start")
    graph.add_guard(goal, "goal")
    if prev is not None:
        graph.next_segment_id = prev.next_segment_id
        queue = reintroduce(prev, arc.horizon[1], arc, prev_trajectories)
    else:
        queue = []
    deadline = (
        time.perf_counter() + limits.time_budget_ms / 1e3
        if limits.time_budget_ms is not None
        else None
    )
    queue_pos = 0
    for _ in range(limits.max_samples):
        if deadline is not None and time.perf_counter() >= deadline:
            break
        if queue_pos < len(queue):
            x, sid = queue[queue_pos]
            queue_pos += 1
        else:
            x, sid = sample_state(arc, rng), None
        if diag:
            diag.samples += 1
        if not point_free(x, obs):
            if diag:
                diag.occupied += 1
            continue
        insert_sample(x, graph, obs, cfg, sid, diag)
    return graph


def enumerate_trajectories(
    graph: GuidanceGraph,
    prev_id_map: dict[frozenset[int], int],
    beta_counter: itertools.count,
    obs: ObstacleSet,
    cfg: PrmConfig = PrmConfig(),
    limit: int | None = None,
) -> list[GeometricTrajectory]:
    """All simple time-monotone start-to-goal paths, shortest `limit` kept.

    Trajectory IDs are reassigned from prev_id_map on an exact segment-set
    match and drawn fresh otherwise. When the graph holds no connector path
    but the goal is directly visible from the start, the single direct
    trajectory is returned as a fallback.
    """
    if limit is None:
        limit = cfg.max_trajectories
    start = next(g for g in graph.guards if g.kind == "start")
    goal = next(g for g in graph.guards if g.kind == "goal")
    adjacency: dict[int, list[tuple[ConnectorNode, int]]] = {}
    for conn in graph.connectors:
        a, b = conn.guards
        adjacency.setdefault(a, []).append((conn, b))
        adjacency.setdefault(b, []).append((conn, a))
    guards_by_id = {g.id: g for g in graph.guards}

    paths: list[tuple[list[StateSpacePoint], tuple[int, ...]]] = []
    stack_points: list[StateSpacePoint] = [start.state]
    stack_segments: list[int] = []
    on_path: set[int] = {start.id}

    def dfs(guard: GuardNode):
        for conn, other_id in adjacency.get(guard.id, []):
            if conn.id in on_path or other_id in on_path:
                continue
            other = guards_by_id[other_id]
            if not (conn.state.t > guard.state.t and other.state.t > conn.state.t):
                continue
            stack_points.extend([conn.state, other.state])
            stack_segments.append(conn.segment_id)
            if other_id == goal.id:
                paths.append((list(stack_points), tuple(stack_segments)))
            else:
                on_path.add(conn.id)
                on_path.add(other_id)
                dfs(other)
                on_path.discard(conn.id)
                on_path.discard(other_id)
            stack_points.pop()
            stack_points.pop()
            stack_segments.pop()

    dfs(start)

    if not paths:
        if connection_valid(start.state, goal.state, cfg.v_max) and segment_free(
            start.state, goal.state, obs, cfg.ds, cfg.time_scale
        ):
            paths.append(([start.state, goal.state], ()))
        else:
            raise NoTrajectoryFound("graph contains no start-to-goal path")

    result = []
    for points, segments in paths:
        traj = PiecewiseTrajectory(points, cfg.time_scale)
        key = frozenset(segments)
        beta = prev_id_map.get(key)
        if beta is None:
            beta = next(beta_counter)
        result.append(GeometricTrajectory(traj, segments, beta))
    result.sort(key=lambda g: g.trajectory.length)
    return result[:limit]


def graph_to_text(graph: GuidanceGraph) -> str:
    """Plain-text dump of nodes and implicit edges for the plotting command."""
    lines = []
    for g in graph.guards:
        lines.append(f"guard {g.id} {g.kind} {g.state.x!r} {g.state.y!r} {g.state.t!r}")
    for c in graph.connectors:
        lines.append(
            f"connector {c.id} {c.guards[0]} {c.guards[1]} {c.segment_id} "
            f"{c.state.x!r} {c.state.y!r} {c.state.t!r}"
        )
    return "\n".join(lines) + "\n"
