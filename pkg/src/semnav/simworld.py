"""Deterministic 2D world: polygon/circle obstacles, labeled disc objects,
ray-cast depth sensing, unicycle kinematics, and collision checks.

Semantic objects are physical discs: they return depth, occlude rays, and
can be picked up by the perceivers, but collision only counts obstacles and
the world boundary (the robot is allowed to come right up to a target).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .geometry import CameraModel, ImagePoint, Pose, project, wrap_angle

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Obstacle primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Circle:
    center: np.ndarray  # (2,) [m]
    radius: float  # [m]

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if self.radius <= 0:
            raise ValueError("circle radius must be positive")

    def distance(self, p: np.ndarray) -> float:
        """Distance from point to the disc boundary; negative inside."""
        return float(np.linalg.norm(p - self.center) - self.radius)


@dataclass(frozen=True)
class Polygon:
    vertices: np.ndarray  # (K, 2) counter-clockwise [m]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        object.__setattr__(self, "vertices", v)

    def contains(self, p: np.ndarray) -> bool:
        v = self.vertices
        prev = None
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            side = cross >= 0
            if prev is None:
                prev = side
            elif side != prev:
                return False
        return True

    def distance(self, p: np.ndarray) -> float:
        """Distance from point to the polygon; 0 inside."""
        if self.contains(p):
            return 0.0
        v = self.vertices
        best = math.inf
        for i in range(len(v)):
            best = min(best, _segment_distance(p, v[i], v[(i + 1) % len(v)]))
        return best


Obstacle = Union[Circle, Polygon]


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _ray_circles(origin: np.ndarray, dirs: np.ndarray, centers: np.ndarray,
                 radii: np.ndarray) -> np.ndarray:
    """First positive hit parameter per (circle, ray); inf when no hit.

    dirs must be unit vectors, shape (N, 2); centers (M, 2); radii (M,).
    Returns (M, N).
    """
    if len(centers) == 0:
        return np.full((0, len(dirs)), np.inf)
    rel = centers - origin  # (M, 2)
    b = rel @ dirs.T  # (M, N)
    c = np.sum(rel ** 2, axis=1)[:, None] - (radii ** 2)[:, None]  # (M, 1)
    disc = b * b - c
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t_near = b - sq
    t_far = b + sq
    t = np.where(t_near > 1e-12, t_near, np.where(t_far > 1e-12, t_far, np.inf))
    return np.where(hit, t, np.inf)


def _ray_segments(origin: np.ndarray, dirs: np.ndarray, seg_a: np.ndarray,
                  seg_b: np.ndarray) -> np.ndarray:
    """First positive hit parameter per (segment, ray); inf when no hit.

    seg_a/seg_b are (E, 2). Returns (E, N).
    """
    if len(seg_a) == 0:
        return np.full((0, len(dirs)), np.inf)
    e = seg_b - seg_a  # (E, 2)
    ao = seg_a - origin  # (E, 2)
    # cross(d, e) per pair -> (E, N)
    denom = dirs[None, :, 0] * e[:, None, 1] - dirs[None, :, 1] * e[:, None, 0]
    cross_ao_e = ao[:, 0] * e[:, 1] - ao[:, 1] * e[:, 0]  # (E,)
    cross_ao_d = ao[:, None, 0] * dirs[None, :, 1] - ao[:, None, 1] * dirs[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross_ao_e[:, None] / denom
        s = cross_ao_d / denom
    ok = (np.abs(denom) > 1e-15) & (t > 1e-12) & (s >= 0.0) & (s <= 1.0)
    return np.where(ok, t, np.inf)


# ---------------------------------------------------------------------------
# World
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SemanticObject:
    id: str
    label: str
    position: np.ndarray  # (2,) [m]
    radius: float  # [m]
    is_goal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))
        if self.radius <= 0:
            raise ValueError("object radius must be positive")


@dataclass(frozen=True)
class KinematicLimits:
    v_max: float = 1.0  # [m/s]
    omega_max: float = 1.5  # [rad/s]
    accel_max: float = 2.0  # [m/s^2]
    alpha_max: float = 6.0  # [rad/s^2]


@dataclass
class RobotState:
    pose: Pose
    v: float = 0.0  # [m/s]
    omega: float = 0.0  # [rad/s]


@dataclass
class World:
    name: str
    bounds: tuple  # (xmin, ymin, xmax, ymax) [m]
    obstacles: list  # of Circle | Polygon
    objects: list  # of SemanticObject
    start: Pose
    camera: CameraModel
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    seed: int = 0

    # cached primitive arrays for vectorized ray casting
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def _arrays(self):
        if "circles" not in self._cache:
            circles = [o for o in self.obstacles if isinstance(o, Circle)]
            polys = [o for o in self.obstacles if isinstance(o, Polygon)]
            self._cache["circles"] = (
                np.array([c.center for c in circles]).reshape(-1, 2),
                np.array([c.radius for c in circles], dtype=float),
            )
            seg_a, seg_b = [], []
            for p in polys:
                v = p.vertices
                for i in range(len(v)):
                    seg_a.append(v[i])
                    seg_b.append(v[(i + 1) % len(v)])
            self._cache["segments"] = (
                np.array(seg_a, dtype=float).reshape(-1, 2),
                np.array(seg_b, dtype=float).reshape(-1, 2),
            )
            self._cache["obj_centers"] = np.array(
                [o.position for o in self.objects]
            ).reshape(-1, 2)
            self._cache["obj_radii"] = np.array([o.radius for o in self.objects], dtype=float)
        return self._cache

    def goal_object(self) -> SemanticObject:
        for o in self.objects:
            if o.is_goal:
                return o
        raise ValueError("world has no goal object")

    def labels(self) -> list:
        out = []
        for o in self.objects:
            if o.label not in out:
                out.append(o.label)
        return out

    def contains_point(self, p: np.ndarray, margin: float = 0.0) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return (xmin + margin <= p[0] <= xmax - margin
                and ymin + margin <= p[1] <= ymax - margin)

    def raycast(self, origin: np.ndarray, dirs: np.ndarray,
                include_objects: bool = True,
                skip_object: Optional[int] = None) -> np.ndarray:
        """Smallest positive hit parameter per ray; inf when nothing is hit."""
        arrs = self._arrays()
        dirs = np.asarray(dirs, dtype=float).reshape(-1, 2)
        t = np.full(len(dirs), np.inf)
        centers, radii = arrs["circles"]
        if len(centers):
            t = np.minimum(t, _ray_circles(origin, dirs, centers, radii).min(axis=0))
        seg_a, seg_b = arrs["segments"]
        if len(seg_a):
            t = np.minimum(t, _ray_segments(origin, dirs, seg_a, seg_b).min(axis=0))
        if include_objects and len(arrs["obj_centers"]):
            hits = _ray_circles(origin, dirs, arrs["obj_centers"], arrs["obj_radii"])
            if skip_object is not None:
                hits[skip_object, :] = np.inf
            if len(hits):
                t = np.minimum(t, hits.min(axis=0))
        return t

    def validate(self) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("degenerate bounds")
        if not self.contains_point(self.start.xy):
            raise ValueError("start pose outside bounds")
        goals = [o for o in self.objects if o.is_goal]
        if len(goals) != 1:
            raise ValueError(f"expected exactly one goal object, found {len(goals)}")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate object ids")
        for o in self.objects:
            if not self.contains_point(o.position):
                raise ValueError(f"object {o.id} outside bounds")
            for ob in self.obstacles:
                if ob.distance(o.position) < o.radius:
                    raise ValueError(f"object {o.id} intersects an obstacle")


# ---------------------------------------------------------------------------
# Sensing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DepthImage:
    values: np.ndarray  # (rows, width) z-depth [m]; max_range where no hit
    bearings: np.ndarray  # (width,) body-frame bearing per column [rad]
    max_range: float  # [m]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def at(self, p) -> float:
        """Depth at an image point (column lookup; rows are replicated)."""
        u = p.u if isinstance(p, ImagePoint) else float(p)
        col = int(np.clip(round(u), 0, self.width - 1))
        return float(self.values[0, col])


def render_depth(world: World, robot: Pose, cam: CameraModel, rows: int = 1) -> DepthImage:
    """Ray-cast one depth row through every pixel column.

    Depth is the camera-frame z coordinate of the first hit, so a frontal
    wall has constant depth across the columns it spans.
    """
    u = np.arange(cam.width, dtype=float)
    x_cam = (u - cam.cx) / cam.fx
    norm = np.sqrt(x_cam ** 2 + 1.0)
    axial = 1.0 / norm  # camera-z component of the unit ray
    bearings = -np.arctan(x_cam)
    angles = robot.yaw + bearings
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    origin = world_camera_position(robot, cam)
    t = world.raycast(origin, dirs)
    depth = t * axial
    depth = np.where(np.isfinite(depth), np.minimum(depth, cam.max_range), cam.max_range)
    values = np.tile(depth, (max(1, rows), 1))
    return DepthImage(values=values, bearings=bearings, max_range=cam.max_range)


def world_camera_position(robot: Pose, cam: CameraModel) -> np.ndarray:
    return robot.body_to_world(cam.mount_trans)[:2]


def visible_objects(world: World, robot: Pose, cam: CameraModel):
    """Objects in the camera frustum with line of sight to their center.

    Returns (object, projected pixel, center z-depth) triples in world
    object order. Both obstacles and other objects block the center ray.
    """
    out = []
    origin = world_camera_position(robot, cam)
    for idx, obj in enumerate(world.objects):
        p3 = np.array([obj.position[0], obj.position[1], 0.0])
        px = project(p3, cam, robot)
        if px is None or not cam.in_bounds(px):
            continue
        rel = obj.position - origin
        dist = float(np.linalg.norm(rel))
        bearing = wrap_angle(math.atan2(rel[1], rel[0]) - robot.yaw)
        depth = dist * math.cos(bearing)
        if depth <= 0.0 or depth > cam.max_range:
            continue
        if dist > 1e-9:
            t_hit = float(world.raycast(origin, rel / dist, skip_object=idx)[0])
            if t_hit < dist - 1e-9:
                continue
        out.append((obj, px, depth))
    return out


# ---------------------------------------------------------------------------
# Kinematics and collision
# ---------------------------------------------------------------------------

def step(state: RobotState, cmd, dt: float, limits: KinematicLimits) -> RobotState:
    """Advance one control step with clamped, rate-limited commands.

    The pose is integrated along the exact unicycle arc, so the result is
    independent of any internal sub-stepping.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_cmd, w_cmd = cmd
    v_t = float(np.clip(v_cmd, -limits.v_max, limits.v_max))
    w_t = float(np.clip(w_cmd, -limits.omega_max, limits.omega_max))
    v = float(np.clip(v_t, state.v - limits.accel_max * dt, state.v + limits.accel_max * dt))
    w = float(np.clip(w_t, state.omega - limits.alpha_max * dt, state.omega + limits.alpha_max * dt))
    x, y = state.pose.xy
    yaw = state.pose.yaw
    if abs(w) < 1e-9:
        x += v * dt * math.cos(yaw)
        y += v * dt * math.sin(yaw)
        new_yaw = yaw
    else:
        r = v / w
        new_yaw = yaw + w * dt
        x += r * (math.sin(new_yaw) - math.sin(yaw))
        y += r * (math.cos(yaw) - math.cos(new_yaw))
    pose = Pose.from_xy(x, y, wrap_angle(new_yaw), z=state.pose.position[2])
    return RobotState(pose=pose, v=v, omega=w)


def check_collision(world: World, pose: Pose, clearance: float) -> bool:
    """True when the robot disc touches an obstacle or leaves the bounds."""
    if clearance <= 0:
        raise ValueError("clearance must be positive")
    p = pose.xy
    if not world.contains_point(p, margin=clearance):
        return True
    for ob in world.obstacles:
        if ob.distance(p) <= clearance:
            return True
    return False


def clearance_to_obstacles(world: World, p: np.ndarray) -> float:
    """Distance from a point to the nearest obstacle or boundary."""
    xmin, ymin, xmax, ymax = world.bounds
    best = min(p[0] - xmin, xmax - p[0], p[1] - ymin, ymax - p[1])
    for ob in world.obstacles:
        best = min(best, ob.distance(p))
    return float(best)


def segment_blocked(world: World, a: np.ndarray, b: np.ndarray,
                    include_objects: bool = False) -> bool:
    """True when the straight segment a->b crosses an obstacle."""
    a = np.asarray(a, dtype=float).reshape(2)
    b = np.asarray(b, dtype=float).reshape(2)
    d = b - a
    length = float(np.linalg.norm(d))
    if length < 1e-12:
        return False
    t = float(world.raycast(a, d / length, include_objects=include_objects)[0])
    return t < length - 1e-9


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _obstacle_to_dict(ob: Obstacle) -> dict:
    if isinstance(ob, Circle):
        return {"type": "circle", "center": list(ob.center), "radius": ob.radius}
    return {"type": "polygon", "vertices": [list(v) for v in ob.vertices]}


def _obstacle_from_dict(d: dict) -> Obstacle:
    if d["type"] == "circle":
        return Circle(np.array(d["center"]), float(d["radius"]))
    if d["type"] == "polygon":
        return Polygon(np.array(d["vertices"]))
    raise ValueError(f"unknown obstacle type {d['type']!r}")


def world_to_dict(world: World) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": world.name,
        "bounds": list(world.bounds),
        "obstacles": [_obstacle_to_dict(ob) for ob in world.obstacles],
        "objects": [
            {
                "id": o.id,
                "label": o.label,
                "position": list(o.position),
                "radius": o.radius,
                "is_goal": o.is_goal,
            }
            for o in world.objects
        ],
        "start_pose": {"position": list(world.start.xy), "yaw": world.start.yaw},
        "camera": {
            "fx": world.camera.fx,
            "fy": world.camera.fy,
            "cx": world.camera.cx,
            "cy": world.camera.cy,
            "width": world.camera.width,
            "height": world.camera.height,
            "max_range": world.camera.max_range,
        },
        "limits": {
            "v_max": world.limits.v_max,
            "omega_max": world.limits.omega_max,
            "accel_max": world.limits.accel_max,
            "alpha_max": world.limits.alpha_max,
        },
        "seed": world.seed,
    }


def world_from_dict(d: dict) -> World:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported world schema_version {version!r}")
    cam = CameraModel(**d["camera"])
    sp = d["start_pose"]
    world = World(
        name=d.get("name", "unnamed"),
        bounds=tuple(d["bounds"]),
        obstacles=[_obstacle_from_dict(ob) for ob in d["obstacles"]],
        objects=[
            SemanticObject(
                id=o["id"],
                label=o["label"],
                position=np.array(o["position"]),
                radius=float(o["radius"]),
                is_goal=bool(o.get("is_goal", False)),
            )
            for o in d["objects"]
        ],
        start=Pose.from_xy(sp["position"][0], sp["position"][1], sp.get("yaw", 0.0)),
        camera=cam,
        limits=KinematicLimits(**d.get("limits", {})),
        seed=int(d.get("seed", 0)),
    )
    world.validate()
    return world


def load_world(path) -> World:
    with open(path) as f:
        return world_from_dict(json.load(f))


def save_world(world: World, path) -> None:
    world.validate()
    Path(path).write_text(json.dumps(world_to_dict(world), indent=2, sort_keys=True))
