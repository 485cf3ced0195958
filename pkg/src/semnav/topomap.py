"""Semantic-probabilistic topological graph.

Nodes carry a 3D position, a semantic label, the fused confidence that
created them, and an exploration probability that starts at that confidence,
is revised multiplicatively by evidence, and decays geometrically with
visits. Edges are undirected with strictly positive Euclidean costs. The
graph always contains exactly one master node (the start viewpoint) and is
kept connected to it after every public operation.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .geometry import CameraModel, Pose, back_project
from .simworld import DepthImage


@dataclass(frozen=True)
class MapConfig:
    min_node_spacing: float = 1.0  # merge new observations closer than this [m]
    knn: int = 3  # new nodes connect to this many nearest neighbors
    edge_radius: float = 5.0  # ... plus everything within this radius [m]
    prune_conf_floor: float = 0.05
    prune_explore_floor: float = 0.02
    visit_decay: float = 0.5  # per-visit exploration decay, (0, 1)
    check_edge_obstacles: bool = True  # drop new edges that cross obstacles

    def __post_init__(self):
        if self.min_node_spacing <= 0:
            raise ValueError("min_node_spacing must be positive")
        if self.knn < 1:
            raise ValueError("knn must be >= 1")
        if not (0.0 <= self.prune_conf_floor < 1.0 and 0.0 <= self.prune_explore_floor < 1.0):
            raise ValueError("prune floors must lie in [0, 1)")
        if not (0.0 < self.visit_decay < 1.0):
            raise ValueError("visit_decay must lie in (0, 1)")


@dataclass
class TopoNode:
    id: int
    position: np.ndarray  # (3,) [m]
    label: str
    confidence: float  # (0, 1]
    explore_prob: float  # [0, 1]
    explore_init: float  # value explore_prob decays from
    kind: str  # "master" | "child"
    visits: int = 0


class TopoMap:
    """Mutable landmark graph owned by the mission loop."""

    def __init__(self, master_position, cfg: MapConfig = MapConfig(),
                 master_label: str = "start"):
        self.cfg = cfg
        self.nodes: dict = {}
        self.adj: dict = {}  # id -> {neighbor id: cost}
        pos = np.zeros(3)
        pos[: len(np.atleast_1d(master_position))] = np.asarray(master_position, dtype=float)
        self.master_id = 0
        self._next_id = 1
        self.nodes[0] = TopoNode(0, pos, master_label, 1.0, 0.0, 0.0, "master")
        self.adj[0] = {}

    # -- queries ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    def children(self):
        return [n for n in self.nodes.values() if n.kind == "child"]

    def nearest_node(self, xy) -> int:
        p = np.asarray(xy, dtype=float)[:2]
        return min(self.nodes, key=lambda i: (float(np.linalg.norm(self.nodes[i].position[:2] - p)), i))

    def edge_list(self):
        out = []
        for i in sorted(self.adj):
            for j, c in sorted(self.adj[i].items()):
                if i < j:
                    out.append((i, j, c))
        return out

    # -- insertion ----------------------------------------------------------

    def insert_observation(self, target, depth: DepthImage, cam: CameraModel,
                           robot: Pose,
                           line_blocked: Optional[Callable] = None) -> Optional[int]:
        """Back-project a fused target and insert or merge it.

        Returns the node id, or None when the depth under the target point
        is unusable (no return, out of range) and the observation must be
        skipped.
        """
        d = depth.at(target.point)
        if not (0.0 < d < depth.max_range - 1e-9):
            return None
        try:
            pos = back_project(target.point, d, cam, robot, max_range=depth.max_range)
        except ValueError:
            return None
        return self.insert_point(pos, target.label, target.confidence, line_blocked)

    def insert_point(self, position, label: str, confidence: float,
                     line_blocked: Optional[Callable] = None) -> int:
        """Insert a world-frame landmark, merging within min_node_spacing."""
        pos = np.asarray(position, dtype=float).reshape(3)
        if self.nodes:
            nid = min(
                self.nodes,
                key=lambda i: (float(np.linalg.norm(self.nodes[i].position - pos)), i),
            )
            nearest = self.nodes[nid]
            if float(np.linalg.norm(nearest.position - pos)) < self.cfg.min_node_spacing:
                if nearest.kind == "child" and confidence > nearest.confidence:
                    nearest.label = label
                    nearest.confidence = confidence
                    nearest.explore_init = confidence
                    nearest.explore_prob = min(
                        1.0, self.cfg.visit_decay ** nearest.visits * confidence)
                return nid
        node = TopoNode(
            id=self._next_id,
            position=pos,
            label=label,
            confidence=confidence,
            explore_prob=min(1.0, max(0.0, confidence)),
            explore_init=confidence,
            kind="child",
        )
        self._next_id += 1
        self.nodes[node.id] = node
        self.adj[node.id] = {}
        self._wire_edges(node, line_blocked)
        return node.id

    def _wire_edges(self, node: TopoNode, line_blocked: Optional[Callable]) -> None:
        others = [n for n in self.nodes.values() if n.id != node.id]
        if not others:
            return
        dists = sorted(
            (float(np.linalg.norm(n.position - node.position)), n.id) for n in others
        )
        wanted = {nid for _, nid in dists[: self.cfg.knn]}
        wanted |= {nid for d, nid in dists if d <= self.cfg.edge_radius}
        for d, nid in dists:
            if nid not in wanted:
                continue
            if line_blocked is not None and line_blocked(node.position[:2],
                                                         self.nodes[nid].position[:2]):
                continue
            self._add_edge(node.id, nid, d)
        if not self.adj[node.id]:
            # all preferred links were blocked; keep the graph connected
            d, nid = dists[0]
            self._add_edge(node.id, nid, d)

    def _add_edge(self, i: int, j: int, cost: float) -> None:
        if i == j:
            raise ValueError("self loops are not allowed")
        cost = max(float(cost), 1e-9)
        self.adj[i][j] = cost
        self.adj[j][i] = cost

    # -- belief updates -----------------------------------------------------

    def update_belief(self, node_id: int, likelihood_ratio: float) -> float:
        """Multiplicative belief revision, clamped to [0, 1]."""
        if likelihood_ratio <= 0:
            raise ValueError("likelihood ratio must be positive")
        node = self.nodes[node_id]
        node.explore_prob = min(1.0, max(0.0, likelihood_ratio * node.explore_prob))
        return node.explore_prob

    def mark_visited(self, node_id: int) -> None:
        """Decay exploration geometrically with the visit count."""
        node = self.nodes[node_id]
        node.visits += 1
        node.explore_prob = min(
            1.0, max(0.0, self.cfg.visit_decay ** node.visits * node.explore_init))

    # -- pruning ------------------------------------------------------------

    def prune(self, protected: Iterable = ()) -> int:
        """Drop low-value child nodes and re-link any orphaned components."""
        protected = set(protected) | {self.master_id}
        doomed = [
            n.id
            for n in self.nodes.values()
            if n.kind == "child" and n.id not in protected
            and (n.confidence < self.cfg.prune_conf_floor
                 or n.explore_prob < self.cfg.prune_explore_floor)
        ]
        for nid in doomed:
            for nb in list(self.adj[nid]):
                del self.adj[nb][nid]
            del self.adj[nid]
            del self.nodes[nid]
        self._reconnect()
        return len(doomed)

    def _components(self):
        seen = set()
        comps = []
        for start in sorted(self.nodes):
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                cur = stack.pop()
                for nb in self.adj[cur]:
                    if nb not in comp:
                        comp.add(nb)
                        stack.append(nb)
            seen |= comp
            comps.append(comp)
        return comps

    def _reconnect(self) -> None:
        while True:
            comps = self._components()
            if len(comps) <= 1:
                return
            orphan = next(c for c in comps if self.master_id not in c)
            rest = [i for i in self.nodes if i not in orphan]
            best = None
            for u in sorted(orphan):
                for v in rest:
                    d = float(np.linalg.norm(self.nodes[u].position - self.nodes[v].position))
                    if best is None or d < best[0]:
                        best = (d, u, v)
            self._add_edge(best[1], best[2], best[0])

    # -- distances ----------------------------------------------------------

    def traversal_cost(self, robot: Pose, node_id: int) -> float:
        """Graph travel cost from the robot to a node.

        The robot first hops to its nearest map node (straight-line), then
        follows shortest-path edge costs. Falls back to plain Euclidean
        distance when the graph offers no route.
        """
        if node_id not in self.nodes:
            raise KeyError(node_id)
        entry = self.nearest_node(robot.xy)
        hop = float(np.linalg.norm(self.nodes[entry].position[:2] - robot.xy))
        dist = self._dijkstra(entry).get(node_id)
        if dist is None:
            return float(np.linalg.norm(self.nodes[node_id].position[:2] - robot.xy))
        return hop + dist

    def _dijkstra(self, source: int) -> dict:
        dist = {source: 0.0}
        heap = [(0.0, source)]
        while heap:
            d, cur = heapq.heappop(heap)
            if d > dist.get(cur, math.inf):
                continue
            for nb, c in self.adj[cur].items():
                nd = d + c
                if nd < dist.get(nb, math.inf) - 1e-15:
                    dist[nb] = nd
                    heapq.heappush(heap, (nd, nb))
        return dist

    # -- export ---------------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "nodes": [
                {
                    "id": n.id,
                    "position": [float(x) for x in n.position],
                    "label": n.label,
                    "confidence": n.confidence,
                    "explore_prob": n.explore_prob,
                    "kind": n.kind,
                    "visits": n.visits,
                }
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "edges": [
                {"i": i, "j": j, "cost": c} for i, j, c in self.edge_list()
            ],
        }
