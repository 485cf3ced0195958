import math

import numpy as np
import pytest

from semnav.geometry import CameraModel, ImagePoint, Pose, project
from semnav.local_planner import LocalPlannerParams, detect_stuck, plan_local
from semnav.simworld import (
    Circle,
    KinematicLimits,
    Polygon,
    RobotState,
    SemanticObject,
    World,
    check_collision,
    render_depth,
    step,
)

CAM = CameraModel(fx=92.0, fy=92.0, cx=80.0, cy=60.0, width=160, height=120, max_range=8.0)
LIMITS = KinematicLimits(v_max=1.0, omega_max=1.5, accel_max=2.0, alpha_max=6.0)
PARAMS = LocalPlannerParams(v_max=1.0, omega_max=1.5)


def make_world(obstacles=(), bounds=(-20, -20, 20, 20)):
    return World(
        name="t", bounds=bounds, obstacles=list(obstacles),
        objects=[SemanticObject("g", "box", np.array([bounds[2] - 1.0, bounds[3] - 1.0]),
                                0.3, is_goal=True)],
        start=Pose.from_xy(0, 0, 0), camera=CAM, limits=LIMITS,
    )


def goal_pixel(goal, pose):
    px = project(np.array([goal[0], goal[1], 0.0]), CAM, pose)
    if px is None or not CAM.in_bounds(px):
        return None
    return px


def rollout(world, start, goal, n_steps, params=PARAMS, dt=0.1, clearance=0.3):
    state = RobotState(start)
    poses = [start]
    for _ in range(n_steps):
        depth = render_depth(world, state.pose, CAM)
        cmd = plan_local(depth, goal_pixel(goal, state.pose), goal, state.pose, params)
        state = step(state, cmd, dt, world.limits)
        poses.append(state.pose)
        if check_collision(world, state.pose, clearance):
            return poses, True
        if np.linalg.norm(state.pose.xy - goal[:2]) < 0.3:
            return poses, False
    return poses, False


# ---------------------------------------------------------------------------
# plan_local
# ---------------------------------------------------------------------------

def test_empty_view_goal_ahead_full_speed():
    w = make_world()
    pose = Pose.from_xy(0, 0, 0)
    depth = render_depth(w, pose, CAM)
    goal = np.array([5.0, 0.0])
    v, om = plan_local(depth, goal_pixel(goal, pose), goal, pose, PARAMS)
    assert v == pytest.approx(PARAMS.v_max)
    assert abs(om) < 0.15


def test_goal_behind_rotates_in_place():
    w = make_world()
    pose = Pose.from_xy(0, 0, 0)
    depth = render_depth(w, pose, CAM)
    goal = np.array([-5.0, 1.0])  # behind, slightly left
    v, om = plan_local(depth, None, goal, pose, PARAMS)
    assert v == 0.0
    assert om == PARAMS.omega_max
    goal = np.array([-5.0, -1.0])  # behind, slightly right
    v, om = plan_local(depth, None, goal, pose, PARAMS)
    assert v == 0.0
    assert om == -PARAMS.omega_max


def test_blocked_ray_with_left_gap():
    # wall covers straight ahead and rightwards; gap opens about 30 deg left
    wall = Polygon(np.array([[2.0, -4.0], [2.6, -4.0], [2.6, 0.6], [2.0, 0.6]]))
    w = make_world([wall])
    pose = Pose.from_xy(0, 0, 0)
    depth = render_depth(w, pose, CAM)
    goal = np.array([6.0, 0.0])
    v, om = plan_local(depth, goal_pixel(goal, pose), goal, pose, PARAMS)
    assert om > 0.2  # swings left into the free gap
    poses, hit = rollout(w, pose, goal, 120)
    assert not hit
    # and the rollout makes real progress toward the goal
    d0 = np.linalg.norm(poses[0].xy - goal)
    d1 = min(np.linalg.norm(p.xy - goal) for p in poses)
    assert d1 < d0 - 1.0


def test_fully_blocked_rotates():
    # wall closer than the stop clearance across the entire view
    wall = Polygon(np.array([[0.4, -8.0], [1.4, -8.0], [1.4, 8.0], [0.4, 8.0]]))
    w = make_world([wall])
    pose = Pose.from_xy(0, 0, 0)
    depth = render_depth(w, pose, CAM)
    v, om = plan_local(depth, ImagePoint(80, 60), np.array([5.0, 0.0]), pose, PARAMS)
    assert v == 0.0
    assert abs(om) == PARAMS.omega_max


def test_commands_always_within_bounds():
    rng = np.random.default_rng(0)
    w = make_world([Circle(np.array([3.0, 0.5]), 0.8),
                    Circle(np.array([4.0, -2.0]), 1.2)])
    for _ in range(200):
        pose = Pose.from_xy(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-3.14, 3.14))
        depth = render_depth(w, pose, CAM)
        goal = np.array([rng.uniform(-8, 8), rng.uniform(-8, 8)])
        v, om = plan_local(depth, goal_pixel(goal, pose), goal, pose, PARAMS)
        assert -PARAMS.v_max <= v <= PARAMS.v_max
        assert -PARAMS.omega_max <= om <= PARAMS.omega_max


def test_goal_directed_in_empty_world():
    w = make_world()
    for goal in [np.array([6.0, 3.0]), np.array([-4.0, 5.0]), np.array([2.0, -7.0])]:
        poses, hit = rollout(w, Pose.from_xy(0, 0, 0), goal, 400)
        assert not hit
        assert np.linalg.norm(poses[-1].xy - goal) < 0.3


def test_closed_loop_safety_over_convex_obstacle_corpus():
    # single static convex obstacle between start and goal, many shapes;
    # closed-loop execution must never trip the collision check
    shapes = [
        Circle(np.array([3.0, 0.0]), 0.6),
        Circle(np.array([3.5, 0.8]), 1.0),
        Circle(np.array([2.5, -0.5]), 0.4),
        Polygon(np.array([[2.5, -0.8], [3.5, -0.8], [3.5, 0.8], [2.5, 0.8]])),
        Polygon(np.array([[2.8, 0.0], [4.0, -1.0], [4.6, 0.4], [3.4, 1.1]])),
        Polygon(np.array([[2.0, -0.3], [2.9, -1.4], [3.8, -0.2]])),
    ]
    goal = np.array([7.0, 0.0])
    for shape in shapes:
        w = make_world([shape])
        poses, hit = rollout(w, Pose.from_xy(0, 0, 0), goal, 400)
        assert not hit, f"collision with {shape}"
        assert np.linalg.norm(poses[-1].xy - goal) < 0.3, f"did not reach goal around {shape}"


# ---------------------------------------------------------------------------
# detect_stuck
# ---------------------------------------------------------------------------

def test_stationary_is_stuck():
    poses = [Pose.from_xy(1.0, 1.0, 0.0)] * PARAMS.stuck_window
    assert detect_stuck(poses, PARAMS)


def test_straight_motion_not_stuck():
    poses = [Pose.from_xy(0.1 * i, 0.0, 0.0) for i in range(PARAMS.stuck_window)]
    assert not detect_stuck(poses, PARAMS)


def test_oscillation_is_stuck():
    poses = [Pose.from_xy(0.01 * (i % 2), 0.0, 0.0) for i in range(PARAMS.stuck_window)]
    assert detect_stuck(poses, PARAMS)


def test_short_history_not_stuck():
    poses = [Pose.from_xy(0, 0, 0)] * (PARAMS.stuck_window - 1)
    assert not detect_stuck(poses, PARAMS)
