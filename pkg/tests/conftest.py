import numpy as np
import pytest

from topoplan.world import Obstacle, ObstacleSet, predictions_for


def make_obstacle_set(
    specs,
    robot_radius=0.5,
    horizon=2.0,
    h=0.05,
):
    """Obstacle set from (center, velocity, radius) triples over the horizon."""
    n_steps = int(round(horizon / h))
    obstacles = [
        Obstacle(id=i, center=tuple(c), velocity=tuple(v), radius=r)
        for i, (c, v, r) in enumerate(specs)
    ]
    return predictions_for(obstacles, n_steps, h, robot_radius)


@pytest.fixture
def empty_obstacles():
    return ObstacleSet(predictions=(), robot_radius=0.5, horizon=2.0)


@pytest.fixture
def static_disc():
    """Single static disc at (2, 0) with combined radius 1 over [0, 2] s."""
    return make_obstacle_set([((2.0, 0.0), (0.0, 0.0), 0.5)], robot_radius=0.5)
