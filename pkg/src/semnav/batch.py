"""Seeded trial batches: start-pose sampling, component wiring, execution.

Both the command-line interface and the experiment scripts drive episodes
through these helpers so that a (world, base seed, configuration) triple
always produces the same records.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fusion import FUSION_VARIANTS, FusionParams
from .geometry import Pose
from .local_planner import LocalPlannerParams
from .metrics import grid_geodesic
from .mission import EpisodeRecord, MissionComponents, MissionConfig, run_episode
from .perception import (
    ObjectNoise,
    OracleObjectPerceiver,
    OracleScenePerceiver,
    SceneNoise,
)
from .simworld import World, check_collision
from .subgoals import LexicalScorer, PlannerParams
from .topomap import MapConfig

FUSION_MODES = ("adaptive", "naive", "scene", "object")
COARSE_MODES = ("joint", "llm", "prob")
PERCEPTION_MODES = ("oracle", "bridge")


@dataclass(frozen=True)
class NoiseProfile:
    scene: SceneNoise = field(default_factory=SceneNoise)
    objects: ObjectNoise = field(default_factory=ObjectNoise)


NOISELESS = NoiseProfile()

# default corruption used by the noise ablations
DEFAULT_NOISE = NoiseProfile(
    scene=SceneNoise(base_confidence=0.75, sigma_confidence=0.10, sigma_px=3.0,
                     p_mislabel=0.15),
    objects=ObjectNoise(base_confidence=0.85, sigma_confidence=0.08, sigma_box=2.0,
                        p_miss=0.15, p_mislabel=0.08),
)


def default_mission_config(world: World, instruction: Optional[str] = None,
                           **overrides) -> MissionConfig:
    goal = world.goal_object().label
    return MissionConfig(
        instruction=instruction if instruction is not None else f"find the {goal}",
        goal_label=goal, **overrides)


def build_components(world: World, seed: int, *,
                     fusion: str = "adaptive",
                     coarse: str = "joint",
                     noise: NoiseProfile = NOISELESS,
                     fusion_params: Optional[FusionParams] = None,
                     planner_params: Optional[PlannerParams] = None,
                     local_params: Optional[LocalPlannerParams] = None,
                     map_config: Optional[MapConfig] = None,
                     scorer=None) -> MissionComponents:
    """Wire up the mission stack for one trial of a given variant."""
    if fusion not in FUSION_MODES:
        raise ValueError(f"unknown fusion mode {fusion!r}")
    if coarse not in COARSE_MODES:
        raise ValueError(f"unknown coarse mode {coarse!r}")
    params = planner_params or PlannerParams()
    if coarse == "llm":
        # relevance-only ranking: distance influence switched off
        params = PlannerParams(distance_decay=0.0,
                               explore_threshold=params.explore_threshold,
                               use_graph_distance=params.use_graph_distance)
    return MissionComponents(
        scene_perceiver=OracleScenePerceiver(world, world.camera, noise.scene, seed=seed),
        object_perceiver=OracleObjectPerceiver(world, world.camera, noise.objects,
                                               seed=seed),
        scorer=scorer if scorer is not None else LexicalScorer(),
        fusion_fn=FUSION_VARIANTS[fusion],
        fusion_params=fusion_params or FusionParams(),
        coarse_mode="prob" if coarse == "prob" else "joint",
        planner_params=params,
        local_params=local_params or LocalPlannerParams(),
        map_config=map_config or MapConfig(),
        planner_id=f"{fusion}+{coarse}",
    )


def sample_start(world: World, rng: np.random.Generator,
                 min_goal_dist: float = 2.0, margin: float = 0.45,
                 max_tries: int = 500) -> Pose:
    """Uniform random start in free, goal-reachable space."""
    xmin, ymin, xmax, ymax = world.bounds
    goal = world.goal_object().position
    for _ in range(max_tries):
        x = rng.uniform(xmin + margin, xmax - margin)
        y = rng.uniform(ymin + margin, ymax - margin)
        yaw = rng.uniform(-np.pi, np.pi)
        pose = Pose.from_xy(x, y, yaw)
        if check_collision(world, pose, margin):
            continue
        if float(np.linalg.norm(pose.xy - goal)) < min_goal_dist:
            continue
        if grid_geodesic(world, pose.xy, goal) is None:
            continue
        return pose
    raise RuntimeError("could not sample a valid start pose")


def run_batch(world: World, cfg: MissionConfig,
              components_factory: Callable[[int], MissionComponents],
              trials: int, base_seed: int = 0):
    """Run seeded trials with randomized start poses; returns the records."""
    records = []
    for i in range(trials):
        seed = base_seed + i
        rng = np.random.default_rng(seed)
        start = sample_start(world, rng)
        comps = components_factory(seed)
        records.append(run_episode(world, cfg, comps, start=start, seed=seed))
    return records
