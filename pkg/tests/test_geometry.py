import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semnav.geometry import CameraModel, ImagePoint, Pose, back_project, project, wrap_angle

CAM = CameraModel(fx=92.0, fy=92.0, cx=80.0, cy=60.0, width=160, height=120, max_range=8.0)


def test_wrap_angle_range():
    for a in [-7.0, -math.pi, 0.0, math.pi, 9.42, 100.0]:
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_principal_point_ray():
    # pixel at the principal point goes straight along the optical axis
    robot = Pose.from_xy(0.0, 0.0, 0.0)
    d = 3.7
    pt = back_project(ImagePoint(CAM.cx, CAM.cy), d, CAM, robot)
    assert np.allclose(pt, [d, 0.0, 0.0], atol=1e-12)


def test_back_project_hand_value():
    # one focal length right of the principal point at depth 2 m lands
    # exactly 2 m laterally off the axis point (2, 0, 0)
    robot = Pose.from_xy(0.0, 0.0, 0.0)
    pt = back_project(ImagePoint(CAM.cx + CAM.fx, CAM.cy), 2.0, CAM, robot)
    assert np.allclose(pt, [2.0, -2.0, 0.0], atol=1e-12)
    axis_pt = np.array([2.0, 0.0, 0.0])
    assert math.isclose(np.linalg.norm(pt - axis_pt), 2.0, abs_tol=1e-12)
    # inverse direction: projecting the hand value recovers the pixel
    px = project(pt, CAM, robot)
    assert px is not None
    assert math.isclose(px.u, CAM.cx + CAM.fx, abs_tol=1e-6)
    assert math.isclose(px.v, CAM.cy, abs_tol=1e-6)


def test_project_on_axis():
    robot = Pose.from_xy(1.0, -2.0, 0.3)
    ahead = robot.body_to_world(np.array([4.0, 0.0, 0.0]))
    px = project(ahead, CAM, robot)
    assert px is not None
    assert math.isclose(px.u, CAM.cx, abs_tol=1e-9)
    assert math.isclose(px.v, CAM.cy, abs_tol=1e-9)


def test_project_behind_camera():
    robot = Pose.from_xy(0.0, 0.0, 0.0)
    assert project(np.array([-1.0, 0.0, 0.0]), CAM, robot) is None


@pytest.mark.parametrize("depth", [0.0, -1.0, float("nan"), float("inf"), 9.0])
def test_back_project_rejects_invalid_depth(depth):
    with pytest.raises(ValueError):
        back_project(ImagePoint(80.0, 60.0), depth, CAM, Pose.from_xy(0, 0))


@given(
    u=st.floats(0.0, 159.0),
    v=st.floats(0.0, 119.0),
    depth=st.floats(0.1, 8.0),
    x=st.floats(-5.0, 5.0),
    y=st.floats(-5.0, 5.0),
    yaw=st.floats(-math.pi, math.pi),
)
@settings(max_examples=200)
def test_round_trip_identity(u, v, depth, x, y, yaw):
    robot = Pose.from_xy(x, y, yaw)
    pt = back_project(ImagePoint(u, v), depth, CAM, robot)
    px = project(pt, CAM, robot)
    assert px is not None
    assert math.isclose(px.u, u, abs_tol=1e-6)
    assert math.isclose(px.v, v, abs_tol=1e-6)


@given(
    u=st.floats(0.0, 159.0),
    depth=st.floats(0.1, 8.0),
    theta=st.floats(-math.pi, math.pi),
)
@settings(max_examples=200)
def test_yaw_equivariance(u, depth, theta):
    # rotating the robot rotates the back-projected point about the robot
    base = Pose.from_xy(1.0, 2.0, 0.0)
    rotated = Pose.from_xy(1.0, 2.0, theta)
    p0 = back_project(ImagePoint(u, CAM.cy), depth, CAM, base)
    p1 = back_project(ImagePoint(u, CAM.cy), depth, CAM, rotated)
    rel0 = p0 - base.position
    rel1 = p1 - rotated.position
    expected = rotated.rotation() @ rel0
    assert np.allclose(rel1, expected, atol=1e-9)


def test_column_bearing_inverse():
    for u in [0.0, 20.0, 80.0, 131.5, 159.0]:
        b = CAM.column_bearing(u)
        assert math.isclose(CAM.bearing_column(b), u, abs_tol=1e-9)
    # left of the axis (smaller u) is a positive bearing
    assert CAM.column_bearing(10.0) > 0.0 > CAM.column_bearing(150.0)
