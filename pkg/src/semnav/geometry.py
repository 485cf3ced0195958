"""Poses, pinhole camera model, and image/camera/world projections.

Coordinate conventions used throughout the package:

World frame (right-handed):
  - x-y is the ground plane, z is up.
  - Robot yaw rotates about z; yaw 0 points along +x.

Body frame (right-handed):
  - x forward, y left, z up, origin at the robot center.

Camera frame (standard computer vision):
  - x right (in image), y down, z forward along the optical axis.
  - "Depth" is the z coordinate in this frame, not the ray length.

Image frame:
  - Origin top-left, u right, v down, units pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

# Rotation taking camera-frame vectors to body-frame vectors for a camera
# looking along body +x: cam x (right) -> -y, cam y (down) -> -z, cam z -> +x.
FORWARD_MOUNT_ROT = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


class ImagePoint(NamedTuple):
    """Continuous pixel coordinates."""

    u: float
    v: float


@dataclass(frozen=True)
class Pose:
    """Robot pose in the world frame (planar: pitch/roll are zero)."""

    position: np.ndarray  # (3,) meters
    yaw: float  # radians, normalized to (-pi, pi]

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValueError(f"non-finite position {pos}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @classmethod
    def from_xy(cls, x: float, y: float, yaw: float = 0.0, z: float = 0.0) -> "Pose":
        return cls(np.array([x, y, z], dtype=float), yaw)

    @property
    def xy(self) -> np.ndarray:
        return self.position[:2]

    def rotation(self) -> np.ndarray:
        """World-from-body rotation matrix (yaw about z)."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def body_to_world(self, p_body: np.ndarray) -> np.ndarray:
        return self.rotation() @ np.asarray(p_body, dtype=float) + self.position

    def world_to_body(self, p_world: np.ndarray) -> np.ndarray:
        return self.rotation().T @ (np.asarray(p_world, dtype=float) - self.position)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with a rigid camera-to-body mount transform."""

    fx: float  # focal length [px]
    fy: float  # focal length [px]
    cx: float  # principal point [px]
    cy: float  # principal point [px]
    width: int  # image width [px]
    height: int  # image height [px]
    max_range: float = 8.0  # depth sensing limit [m]
    mount_rot: np.ndarray = field(default_factory=lambda: FORWARD_MOUNT_ROT.copy())
    mount_trans: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")
        object.__setattr__(self, "mount_rot", np.asarray(self.mount_rot, dtype=float).reshape(3, 3))
        object.__setattr__(self, "mount_trans", np.asarray(self.mount_trans, dtype=float).reshape(3))

    def in_bounds(self, p: ImagePoint) -> bool:
        return 0.0 <= p.u < self.width and 0.0 <= p.v < self.height

    def half_fov(self) -> float:
        """Horizontal half field of view [rad]."""
        return math.atan(max(self.cx, self.width - 1 - self.cx) / self.fx)

    def column_bearing(self, u: float) -> float:
        """Bearing of pixel column u in the camera's horizontal plane.

        Positive bearings are to the left of the optical axis (body-frame
        convention), so bearing = -atan((u - cx) / fx).
        """
        return -math.atan((u - self.cx) / self.fx)

    def bearing_column(self, bearing: float) -> float:
        """Inverse of column_bearing."""
        return self.cx - math.tan(bearing) * self.fx


def back_project(p: ImagePoint, depth: float, cam: CameraModel, robot: Pose,
                 max_range: Optional[float] = None) -> np.ndarray:
    """Lift pixel p at the given depth into a 3D world point.

    Raises ValueError when the depth is non-positive, non-finite, or beyond
    the sensing limit; callers are expected to skip such proposals.
    """
    limit = cam.max_range if max_range is None else max_range
    if not math.isfinite(depth) or depth <= 0.0 or depth > limit:
        raise ValueError(f"invalid depth {depth!r}")
    p_cam = np.array(
        [
            (p.u - cam.cx) / cam.fx * depth,
            (p.v - cam.cy) / cam.fy * depth,
            depth,
        ]
    )
    p_body = cam.mount_rot @ p_cam + cam.mount_trans
    return robot.body_to_world(p_body)


def project(point: np.ndarray, cam: CameraModel, robot: Pose) -> Optional[ImagePoint]:
    """Project a world point into the image; None when behind the camera."""
    p_body = robot.world_to_body(np.asarray(point, dtype=float))
    p_cam = cam.mount_rot.T @ (p_body - cam.mount_trans)
    if p_cam[2] <= 0.0:
        return None
    u = cam.fx * p_cam[0] / p_cam[2] + cam.cx
    v = cam.fy * p_cam[1] / p_cam[2] + cam.cy
    return ImagePoint(u, v)
