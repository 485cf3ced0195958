"""Depth-driven local obstacle avoidance.

Samples candidate headings across the depth image's field of view, scores
each by goal alignment minus an inverse-clearance penalty, and converts the
best heading into clamped velocity commands. A fully blocked view rotates
in place (always left, so consecutive frames cannot disagree); a subgoal
behind the robot rotates toward its world bearing. The planner is a pure
function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .geometry import ImagePoint, Pose, wrap_angle
from .simworld import DepthImage


@dataclass(frozen=True)
class LocalPlannerParams:
    v_max: float = 1.0  # [m/s]
    omega_max: float = 1.5  # [rad/s]
    safety_margin: float = 0.60  # lateral clearance kept from obstacles [m]
    heading_samples: int = 41
    goal_gain: float = 1.0
    obstacle_gain: float = 0.9
    detour_bias: float = 0.3  # leftward score slope while the goal ray is blocked
    turn_gain: float = 2.5  # [1/s] heading error to angular velocity
    slow_zone: float = 1.2  # clearance over which speed ramps to v_max [m]
    stop_clearance: float = 0.55  # forward clearance below which v = 0 [m]
    approach_gain: float = 1.2  # [1/s] speed cap near the goal
    goal_blind_zone: float = 0.75  # returns this close before the goal are ignored [m]
    stuck_window: int = 30  # [steps]
    stuck_displacement: float = 0.10  # [m]

    def __post_init__(self):
        for name in ("v_max", "omega_max", "safety_margin", "heading_samples",
                     "goal_gain", "obstacle_gain", "turn_gain", "slow_zone",
                     "stop_clearance", "approach_gain", "stuck_window",
                     "stuck_displacement"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _corridor_clearances(depth: DepthImage, headings: np.ndarray, margin: float,
                         ignore_beyond: float = math.inf) -> np.ndarray:
    """Forward clearance along each heading for a robot of width 2*margin.

    A depth return at bearing b and distance d constrains heading h when
    its lateral offset |d sin(h - b)| is inside the margin; the clearance
    along h is then the axial distance d cos(h - b). Returns at or beyond
    ignore_beyond are dropped (the robot stops at the goal, so whatever
    stands past it should not repel the approach).
    """
    d = depth.values[0]  # (W,)
    b = depth.bearings  # (W,)
    rel = headings[:, None] - b[None, :]  # (H, W)
    lateral = np.abs(d[None, :] * np.sin(rel))
    axial = d[None, :] * np.cos(rel)
    blocking = ((lateral < margin) & (axial > 0.0) & (axial < ignore_beyond)
                & (d[None, :] < depth.max_range - 1e-9))
    axial_masked = np.where(blocking, axial, np.inf)
    clearances = axial_masked.min(axis=1)
    return np.minimum(clearances, depth.max_range)


def plan_local(depth: DepthImage, goal_px: Optional[ImagePoint],
               goal_world: np.ndarray, robot: Pose,
               params: LocalPlannerParams = LocalPlannerParams()) -> Tuple[float, float]:
    """Velocity command (v, omega) steering toward the goal around obstacles."""
    rel = np.asarray(goal_world, dtype=float)[:2] - robot.xy
    goal_dist = float(np.linalg.norm(rel))
    if goal_px is not None and 0.0 <= goal_px.u <= depth.width - 1:
        # prefer the imaged bearing when the subgoal projects into frame
        lo = int(goal_px.u)
        hi = min(lo + 1, depth.width - 1)
        frac = goal_px.u - lo
        goal_bearing = float((1 - frac) * depth.bearings[lo] + frac * depth.bearings[hi])
    else:
        goal_bearing = wrap_angle(math.atan2(rel[1], rel[0]) - robot.yaw)

    fov_lo, fov_hi = float(depth.bearings.min()), float(depth.bearings.max())
    headings = np.linspace(fov_lo, fov_hi, params.heading_samples)
    # always consider straight ahead and the exact goal bearing
    extra = [h for h in (0.0, goal_bearing) if fov_lo <= h <= fov_hi]
    headings = np.concatenate([headings, np.array(extra)])
    clearances = _corridor_clearances(depth, headings, params.safety_margin,
                                      ignore_beyond=goal_dist - params.goal_blind_zone)

    if float(clearances.max()) <= params.stop_clearance + 0.2:
        # everything ahead is (nearly) blocked: rotate left, matching the
        # detour chirality below; a fixed direction takes priority over
        # turning toward the goal so successive frames cannot disagree
        return 0.0, params.omega_max

    if abs(goal_bearing) > math.pi / 2:
        # subgoal behind the robot: turn toward it without advancing
        w = params.omega_max if goal_bearing >= 0 else -params.omega_max
        return 0.0, w

    # goals ahead but outside the frame are still steered toward: alignment
    # simply favors the field-of-view edge nearest the goal bearing
    align = np.cos(headings - goal_bearing)
    penalty = 1.0 / np.clip(clearances, 0.05, 4.0)
    scores = params.goal_gain * align - params.obstacle_gain * penalty
    if fov_lo <= goal_bearing <= fov_hi:
        # when the direct ray to the goal is measurably blocked, commit to
        # going around on the left; a fixed chirality cannot oscillate the
        # way "pick the more open side" does frame to frame
        goal_clear = _corridor_clearances(depth, np.array([goal_bearing]),
                                          params.safety_margin,
                                          ignore_beyond=goal_dist - params.goal_blind_zone)[0]
        if goal_clear < min(goal_dist - 0.1, depth.max_range * 0.9):
            scores = scores + params.detour_bias * headings
    scores = np.where(clearances <= params.stop_clearance, -np.inf, scores)
    best = int(np.argmax(scores))
    heading = float(headings[best])
    clearance = float(clearances[best])

    w = float(np.clip(params.turn_gain * heading, -params.omega_max, params.omega_max))
    speed_scale = np.clip((clearance - params.stop_clearance) / params.slow_zone, 0.0, 1.0)
    # quadratic falloff: sharp turns happen slowly, shrinking the swept arc
    v = params.v_max * float(speed_scale) * max(0.0, math.cos(heading)) ** 2
    v = min(v, params.approach_gain * goal_dist)
    return v, w


def detect_stuck(poses: Sequence[Pose], params: LocalPlannerParams) -> bool:
    """True when net displacement over the window is below the floor."""
    window = params.stuck_window
    if len(poses) < window:
        return False
    a = poses[-window].xy
    b = poses[-1].xy
    return float(np.linalg.norm(b - a)) < params.stuck_displacement
