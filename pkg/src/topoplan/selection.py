"""Scoring and selection of candidate guidance splines.

Each candidate is sampled at constant time intervals and charged for path
length, deviation from the preferred speed, and (discounted) acceleration.
A constant consistency penalty is added to every candidate that was not
selected in the previous iteration, so a challenger must beat the incumbent
by more than that penalty to take over.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .smoothing import GuidanceSpline


class EmptyCandidates(ValueError):
    """select() called without any candidate."""


@dataclass(frozen=True)
class SelectionWeights:
    """Weights of the selection objective (defaults from the experiments)."""

    w_length: float = 1.0
    w_velocity: float = 100.0
    w_accel: float = 100.0
    w_consistency: float = 25.0
    accel_discount: float = 0.95
    v_ref: float = 2.0
    n_samples: int = 20
    # The published objective formally places the consistency constant inside
    # the per-sample sum; applied once by default so hysteresis does not scale
    # with the sample count. True restores the literal per-sample form.
    per_sample_consistency: bool = False


@dataclass(frozen=True)
class SelectionResult:
    chosen_id: int
    costs: tuple[tuple[int, float], ...]


def score(
    spline: GuidanceSpline,
    w: SelectionWeights,
    was_selected_previously: bool,
) -> float:
    """Selection cost of one candidate spline."""
    times = np.linspace(0.0, spline.duration, w.n_samples)
    pos, vel, acc = spline.sample(times)
    length = float(np.linalg.norm(np.diff(pos, axis=0), axis=1).sum())
    speed_err = float(np.abs(np.linalg.norm(vel, axis=1) - w.v_ref).sum())
    discounts = w.accel_discount ** np.arange(w.n_samples)
    accel = float((discounts * np.linalg.norm(acc, axis=1)).sum())
    consistency = 0.0 if was_selected_previously else 1.0
    if w.per_sample_consistency:
        consistency *= w.n_samples
    return (
        w.w_length * length
        + w.w_velocity * speed_err
        + w.w_accel * accel
        + w.w_consistency * consistency
    )


def select(
    candidates: list[GuidanceSpline],
    prev_id: int | None,
    w: SelectionWeights,
) -> SelectionResult:
    """Lowest-cost candidate; ties prefer the previously selected id, then smaller id."""
    if not candidates:
        raise EmptyCandidates("no guidance candidates to select from")
    costs = [
        (c.trajectory_id, score(c, w, c.trajectory_id == prev_id)) for c in candidates
    ]
    chosen = min(costs, key=lambda ic: (ic[1], ic[0] != prev_id, ic[0]))[0]
    return SelectionResult(chosen_id=chosen, costs=tuple(costs))
