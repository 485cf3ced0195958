"""Closed navigation loop: initialize, perceive, fuse, map, plan, step.

An episode starts with a four-direction scan that seeds the landmark graph,
then alternates coarse subgoal selection with per-step local planning until
the robot commits to a node carrying the instructed label, collides, runs
out of steps, or exhausts its candidates. Everything the evaluator needs is
logged into an EpisodeRecord whose canonical JSON form is byte-stable for
identical (world, seed, config).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fusion import FusionParams, associate, compute_kappa, fuse
from .geometry import Pose, project
from .local_planner import LocalPlannerParams, detect_stuck, plan_local
from .perception import capture_frame
from .simworld import (
    RobotState,
    World,
    check_collision,
    render_depth,
    segment_blocked,
    step,
)
from .subgoals import (
    LexicalScorer,
    PlannerParams,
    rank_subgoals,
    rank_subgoals_probability_only,
    score_relevance,
)
from .topomap import MapConfig, TopoMap

INIT_HEADINGS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


@dataclass(frozen=True)
class MissionConfig:
    instruction: str
    goal_label: str
    max_steps: int = 500
    dt: float = 0.1  # [s]
    success_radius: float = 1.0  # metric radius r_s [m]
    goal_commit_radius: float = 0.6  # stop this close to a goal-labeled node [m]
    subgoal_radius: float = 0.5  # arrival distance for intermediate nodes [m]
    reperceive_every: int = 10  # [steps]
    collision_clearance: float = 0.30  # [m]
    support_ratio: float = 1.5  # belief boost for a re-confirming observation
    contradict_ratio: float = 0.5  # belief cut for a missing expected observation
    max_recoveries: int = 3  # stuck recoveries before a full re-scan
    kappa_samples: int = 10
    kappa_margin: float = 0.3  # [m]

    def __post_init__(self):
        if self.success_radius <= 0 or self.max_steps <= 0:
            raise ValueError("success_radius and max_steps must be positive")


@dataclass
class MissionComponents:
    """Pluggable pieces selected by the run configuration."""

    scene_perceiver: object
    object_perceiver: object
    scorer: object = field(default_factory=LexicalScorer)
    fusion_fn: Callable = fuse
    fusion_params: FusionParams = field(default_factory=FusionParams)
    coarse_mode: str = "joint"  # "joint" | "prob"
    planner_params: PlannerParams = field(default_factory=PlannerParams)
    local_params: LocalPlannerParams = field(default_factory=LocalPlannerParams)
    map_config: MapConfig = field(default_factory=MapConfig)
    planner_id: str = "gap-seeker"


@dataclass
class EpisodeRecord:
    seed: int
    world_name: str
    instruction: str
    goal_label: str
    success_radius: float
    planner_id: str = ""
    termination: str = "timeout"  # success | collision | timeout | exhausted
    trajectory: list = field(default_factory=list)  # [x, y, yaw] per step
    commands: list = field(default_factory=list)  # [v, omega] per step
    collision_steps: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    visits: list = field(default_factory=list)  # [step, node id]
    degradations: list = field(default_factory=list)
    map_snapshot: dict = field(default_factory=dict)

    @property
    def final_pose(self):
        return self.trajectory[-1]

    @property
    def success(self) -> bool:
        return self.termination == "success"

    def path_length(self) -> float:
        pts = np.array([[p[0], p[1]] for p in self.trajectory])
        if len(pts) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "world_name": self.world_name,
            "instruction": self.instruction,
            "goal_label": self.goal_label,
            "success_radius": self.success_radius,
            "planner_id": self.planner_id,
            "termination": self.termination,
            "trajectory": self.trajectory,
            "commands": self.commands,
            "collision_steps": self.collision_steps,
            "decisions": self.decisions,
            "visits": self.visits,
            "degradations": self.degradations,
            "map_snapshot": self.map_snapshot,
        }

    def to_json(self) -> str:
        """Canonical byte-stable encoding."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        return cls(**d)

    @classmethod
    def from_json(cls, s: str) -> "EpisodeRecord":
        return cls.from_dict(json.loads(s))


def _pose_row(pose: Pose):
    return [float(pose.position[0]), float(pose.position[1]), float(pose.yaw)]


class _Loop:
    """One episode's mutable state; run() drives it to termination."""

    def __init__(self, world: World, cfg: MissionConfig, comps: MissionComponents,
                 start: Optional[Pose] = None, seed: int = 0):
        self.world = world
        self.cfg = cfg
        self.comps = comps
        self.cam = world.camera
        self.start = start if start is not None else world.start
        self.topo = TopoMap(np.array([*self.start.xy, 0.0]), comps.map_config)
        self.state = RobotState(self.start)
        self.frame_index = 0
        self.visited_labels: list = []
        self.record = EpisodeRecord(
            seed=seed, world_name=world.name, instruction=cfg.instruction,
            goal_label=cfg.goal_label, success_radius=cfg.success_radius,
            planner_id=comps.planner_id,
        )
        self._line_blocked = None
        if comps.map_config.check_edge_obstacles:
            self._line_blocked = lambda a, b: segment_blocked(world, a, b)

    # -- perception into the map -------------------------------------------

    def perceive_once(self, pose: Pose):
        depth = render_depth(self.world, pose, self.cam)
        frame = capture_frame(self.comps.scene_perceiver, self.comps.object_perceiver,
                              pose, depth, self.frame_index)
        self.frame_index += 1
        if frame.degraded:
            self.record.degradations.append(f"perception-frame-{frame.frame_index}")
        cands = associate(frame)
        for c in cands:
            pt = c.point()
            c.free_space = compute_kappa(depth, pt, dist=depth.at(pt),
                                         n_samples=self.cfg.kappa_samples,
                                         margin=self.cfg.kappa_margin)
        target = self.comps.fusion_fn(cands, self.comps.fusion_params)
        merged_id = None
        if target is not None:
            known = set(self.topo.nodes)
            merged_id = self.topo.insert_observation(target, depth, self.cam, pose,
                                                     self._line_blocked)
            if merged_id in known and merged_id is not None:
                node = self.topo.nodes[merged_id]
                # re-confirmation only props up nodes not yet explored;
                # boosting visited ones would resurrect exhausted subgoals
                if node.kind == "child" and node.label == target.label \
                        and node.visits == 0:
                    self.topo.update_belief(merged_id, self.cfg.support_ratio)
        self._contradict(frame, pose, exclude=merged_id)
        return target

    def _contradict(self, frame, pose: Pose, exclude=None):
        seen = {p.label for p in frame.scene} | {d.label for d in frame.objects}
        origin = pose.xy
        for node in self.topo.children():
            if node.id == exclude or node.label in seen:
                continue
            rel = node.position[:2] - origin
            dist = float(np.linalg.norm(rel))
            if dist > 0.8 * self.cam.max_range:
                continue
            px = project(node.position, self.cam, pose)
            if px is None or not self.cam.in_bounds(px):
                continue
            if segment_blocked(self.world, origin, node.position[:2],
                               include_objects=True):
                continue
            self.topo.update_belief(node.id, self.cfg.contradict_ratio)

    def scan_four_directions(self):
        base = self.state.pose
        for heading in INIT_HEADINGS:
            view = Pose(base.position.copy(), heading)
            self.perceive_once(view)

    # -- coarse planning -----------------------------------------------------

    def relevance_by_node(self):
        labels = sorted({n.label for n in self.topo.children()})
        if not labels:
            return {}
        scores = score_relevance(self.comps.scorer, self.cfg.instruction, labels,
                                 self.visited_labels)
        by_label = dict(zip(labels, scores))
        return {n.id: by_label[n.label] for n in self.topo.children()}

    def choose_subgoal(self, log_step: int):
        if self.comps.coarse_mode == "prob":
            ranked = rank_subgoals_probability_only(self.topo, self.state.pose,
                                                    self.comps.planner_params)
        else:
            ranked = rank_subgoals(self.topo, self.state.pose,
                                   self.relevance_by_node(),
                                   self.comps.planner_params)
        best = None
        for e in ranked:
            if best is None:
                best = e
            elif (e.joint > best.joint
                  or (e.joint == best.joint
                      and (e.distance < best.distance
                           or (e.distance == best.distance
                               and e.node_id < best.node_id)))):
                best = e
        self.record.decisions.append({
            "step": log_step,
            "pose": _pose_row(self.state.pose),
            "chosen": None if best is None else best.node_id,
            "candidates": [
                {
                    "id": e.node_id,
                    "label": self.topo.nodes[e.node_id].label,
                    "position": [float(x) for x in e.position],
                    "confidence": float(e.confidence),
                    "explore_prob": float(self.topo.nodes[e.node_id].explore_prob),
                    "relevance": float(e.relevance),
                    "distance": float(e.distance),
                    "joint": float(e.joint),
                }
                for e in sorted(ranked, key=lambda e: e.node_id)
            ],
        })
        return best

    def goal_node_reached(self):
        for node in self.topo.children():
            if node.label != self.cfg.goal_label:
                continue
            if float(np.linalg.norm(node.position[:2] - self.state.pose.xy)) \
                    <= self.cfg.goal_commit_radius:
                return node.id
        return None

    # -- main loop ----------------------------------------------------------

    def run(self) -> EpisodeRecord:
        cfg, comps = self.cfg, self.comps
        self.record.trajectory.append(_pose_row(self.state.pose))
        self.scan_four_directions()
        subgoal = self.choose_subgoal(log_step=0)
        recoveries = 0
        rescanned_while_exhausted = False
        pose_history = [self.state.pose]

        for step_i in range(1, cfg.max_steps + 1):
            if subgoal is None:
                if rescanned_while_exhausted:
                    self.record.termination = "exhausted"
                    break
                self.scan_four_directions()
                rescanned_while_exhausted = True
                subgoal = self.choose_subgoal(log_step=step_i)
                continue
            rescanned_while_exhausted = False

            if step_i % cfg.reperceive_every == 0:
                self.perceive_once(self.state.pose)
                self.topo.prune(protected={subgoal.node_id})
                if subgoal.node_id not in self.topo.nodes:
                    subgoal = self.choose_subgoal(log_step=step_i)
                    continue

            goal_id = self.goal_node_reached()
            if goal_id is not None:
                self.record.termination = "success"
                break

            dist = float(np.linalg.norm(subgoal.position[:2] - self.state.pose.xy))
            if dist <= cfg.subgoal_radius:
                self.topo.mark_visited(subgoal.node_id)
                self.record.visits.append([step_i, subgoal.node_id])
                label = self.topo.nodes[subgoal.node_id].label
                if label not in self.visited_labels:
                    self.visited_labels.append(label)
                self.perceive_once(self.state.pose)
                self.topo.prune(protected=set())
                subgoal = self.choose_subgoal(log_step=step_i)
                continue

            depth = render_depth(self.world, self.state.pose, self.cam)
            goal_px = project(subgoal.position, self.cam, self.state.pose)
            if goal_px is not None and not self.cam.in_bounds(goal_px):
                goal_px = None
            cmd = plan_local(depth, goal_px, subgoal.position, self.state.pose,
                             comps.local_params)
            self.state = step(self.state, cmd, cfg.dt, self.world.limits)
            self.record.trajectory.append(_pose_row(self.state.pose))
            self.record.commands.append([float(cmd[0]), float(cmd[1])])
            pose_history.append(self.state.pose)

            if check_collision(self.world, self.state.pose, cfg.collision_clearance):
                self.record.collision_steps.append(step_i)
                self.record.termination = "collision"
                break

            if detect_stuck(pose_history, comps.local_params):
                recoveries += 1
                pose_history = []
                if recoveries >= cfg.max_recoveries:
                    self.scan_four_directions()
                    recoveries = 0
                else:
                    spun = Pose(self.state.pose.position.copy(),
                                self.state.pose.yaw + math.pi / 2)
                    self.state = RobotState(spun, self.state.v, self.state.omega)
                    self.perceive_once(self.state.pose)
                subgoal = self.choose_subgoal(log_step=step_i)
        else:
            self.record.termination = "timeout"

        self.record.map_snapshot = self.topo.snapshot()
        return self.record


def initialize(world: World, cfg: MissionConfig, comps: MissionComponents,
               start: Optional[Pose] = None):
    """Seed a map with the four-direction scan; returns (map, robot state)."""
    loop = _Loop(world, cfg, comps, start=start)
    loop.scan_four_directions()
    return loop.topo, loop.state


def run_episode(world: World, cfg: MissionConfig, comps: MissionComponents,
                start: Optional[Pose] = None, seed: int = 0) -> EpisodeRecord:
    """Run one full episode and return its record."""
    return _Loop(world, cfg, comps, start=start, seed=seed).run()
