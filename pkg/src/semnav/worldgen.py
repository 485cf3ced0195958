"""Random world synthesis with rejection sampling.

Obstacles and labeled objects are placed with generous mutual clearances so
the worlds stay navigable; generation fails loudly when the requested
density cannot be met, and regenerates until the goal is reachable from the
start on the ground-truth grid.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .geometry import CameraModel, Pose
from .metrics import grid_geodesic
from .simworld import (
    Circle,
    KinematicLimits,
    Polygon,
    SemanticObject,
    World,
    clearance_to_obstacles,
)

DEFAULT_CAMERA = dict(fx=92.0, fy=92.0, cx=80.0, cy=60.0, width=160, height=120,
                      max_range=8.0)

OBSTACLE_CLEARANCE = 1.8  # min surface-to-surface gap between obstacles [m]
OBJECT_CLEARANCE = 1.0  # min object-to-obstacle gap [m]
OBJECT_SPACING = 2.2  # min object-to-object distance [m]
BORDER = 1.2  # keep-out margin from the world edge [m]
MAX_ATTEMPTS = 4000


class GenerationError(RuntimeError):
    pass


def _box(cx, cy, w, h, angle=0.0) -> Polygon:
    c, s = math.cos(angle), math.sin(angle)
    r = np.array([[c, -s], [s, c]])
    half = np.array([[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]])
    return Polygon(half @ r.T + np.array([cx, cy]))


def _obstacle_radius(ob) -> float:
    if isinstance(ob, Circle):
        return ob.radius
    return float(np.max(np.linalg.norm(ob.vertices - ob.vertices.mean(axis=0), axis=1)))


def _obstacle_center(ob) -> np.ndarray:
    if isinstance(ob, Circle):
        return ob.center
    return ob.vertices.mean(axis=0)


def generate_world(name: str, labels: Sequence[str], goal_label: str,
                   size=(16.0, 12.0), n_obstacles: int = 5, seed: int = 0,
                   object_radius: float = 0.3,
                   limits: Optional[KinematicLimits] = None) -> World:
    """Sample a world satisfying all validity invariants.

    labels lists every object to place (one object per entry, duplicates
    allowed); exactly one entry must equal goal_label unless several share
    it, in which case the first placed instance is the goal.
    """
    if goal_label not in labels:
        raise ValueError("goal_label must appear in labels")
    rng = np.random.default_rng(seed)
    half_w, half_h = size[0] / 2.0, size[1] / 2.0
    bounds = (-half_w, -half_h, half_w, half_h)
    start = Pose.from_xy(0.0, 0.0, 0.0)

    for trial in range(40):
        obstacles = _place_obstacles(rng, bounds, n_obstacles, start)
        if obstacles is None:
            continue
        objects = _place_objects(rng, bounds, obstacles, labels, goal_label,
                                 object_radius, start)
        if objects is None:
            continue
        world = World(
            name=name, bounds=bounds, obstacles=obstacles, objects=objects,
            start=start, camera=CameraModel(**DEFAULT_CAMERA),
            limits=limits or KinematicLimits(), seed=seed,
        )
        world.validate()
        goal = world.goal_object()
        if grid_geodesic(world, start.xy, goal.position) is None:
            continue
        return world
    raise GenerationError(
        f"could not generate a valid world after 40 layouts (density too high?)")


def _place_obstacles(rng, bounds, n, start: Pose):
    xmin, ymin, xmax, ymax = bounds
    obstacles = []
    attempts = 0
    while len(obstacles) < n:
        attempts += 1
        if attempts > MAX_ATTEMPTS:
            return None
        x = rng.uniform(xmin + BORDER + 1.0, xmax - BORDER - 1.0)
        y = rng.uniform(ymin + BORDER + 1.0, ymax - BORDER - 1.0)
        if rng.random() < 0.5:
            ob = Circle(np.array([x, y]), float(rng.uniform(0.4, 0.8)))
        else:
            ob = _box(x, y, float(rng.uniform(0.8, 1.6)), float(rng.uniform(0.8, 1.6)),
                      angle=float(rng.uniform(0, math.pi)))
        r = _obstacle_radius(ob)
        if np.linalg.norm(_obstacle_center(ob) - start.xy) < r + 2.2:
            continue
        ok = True
        for other in obstacles:
            gap = (np.linalg.norm(_obstacle_center(ob) - _obstacle_center(other))
                   - r - _obstacle_radius(other))
            if gap < OBSTACLE_CLEARANCE:
                ok = False
                break
        if ok:
            obstacles.append(ob)
    return obstacles


def _place_objects(rng, bounds, obstacles, labels, goal_label, radius, start: Pose):
    xmin, ymin, xmax, ymax = bounds
    objects = []
    goal_assigned = False
    for k, label in enumerate(labels):
        placed = False
        for _ in range(MAX_ATTEMPTS):
            x = rng.uniform(xmin + BORDER, xmax - BORDER)
            y = rng.uniform(ymin + BORDER, ymax - BORDER)
            p = np.array([x, y])
            if np.linalg.norm(p - start.xy) < 2.5:
                continue
            if any(ob.distance(p) < radius + OBJECT_CLEARANCE for ob in obstacles):
                continue
            if any(np.linalg.norm(p - o.position) < OBJECT_SPACING for o in objects):
                continue
            is_goal = (label == goal_label and not goal_assigned)
            objects.append(SemanticObject(
                id=f"obj{k}", label=label, position=p, radius=radius, is_goal=is_goal))
            goal_assigned = goal_assigned or is_goal
            placed = True
            break
        if not placed:
            return None
    return objects if goal_assigned else None
