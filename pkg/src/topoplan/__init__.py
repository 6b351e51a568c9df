"""Two-layer motion planner among moving disc obstacles.

High-level layer: sparse visibility roadmap in space-time enumerating
topologically distinct guidance trajectories, smoothed into cubic splines and
scored for selection. Low-level layer: contouring model-predictive controller
tracking the selected guidance under linearized collision constraints.
"""

from .world import (
    DEFAULT_LIMITS,
    Obstacle,
    ObstaclePrediction,
    ObstacleSet,
    RobotInput,
    RobotLimits,
    RobotState,
    StateSpacePoint,
    point_free,
    predict_constant_velocity,
    predictions_for,
    robot_step,
    segment_free,
)
from .topology import PiecewiseTrajectory, UvdConfig, uvd_equivalent, uvd_oracle

__all__ = [
    "DEFAULT_LIMITS",
    "Obstacle",
    "ObstaclePrediction",
    "ObstacleSet",
    "PiecewiseTrajectory",
    "RobotInput",
    "RobotLimits",
    "RobotState",
    "StateSpacePoint",
    "UvdConfig",
    "point_free",
    "predict_constant_velocity",
    "predictions_for",
    "robot_step",
    "segment_free",
    "uvd_equivalent",
    "uvd_oracle",
]

__version__ = "0.1.0"
