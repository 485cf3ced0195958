"""Global subgoal selection over the topological map.

Candidates are child nodes whose exploration probability clears a
threshold. Each is scored by relevance * confidence * exp(-decay * travel
cost); the probability-only variant ranks by confidence alone. Relevance
comes from a pluggable scorer: the built-in lexical scorer is a pure
function of (instruction, label, visited history), while a bridge-backed
scorer can substitute an external language model.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .geometry import Pose
from .topomap import TopoMap

SYNONYM_BONUS = 0.2
VISITED_PENALTY = 0.3


@dataclass(frozen=True)
class PlannerParams:
    distance_decay: float = 0.15  # joint-score distance trade-off [1/m]
    explore_threshold: float = 0.05  # candidacy floor on exploration probability
    use_graph_distance: bool = True  # False: straight-line distance instead

    def __post_init__(self):
        if self.distance_decay < 0:
            raise ValueError("distance_decay must be >= 0")
        if not (0.0 <= self.explore_threshold < 1.0):
            raise ValueError("explore_threshold must lie in [0, 1)")


@dataclass(frozen=True)
class Subgoal:
    node_id: int
    position: np.ndarray  # (3,)
    relevance: float
    confidence: float
    distance: float  # [m]
    joint: float


def tokenize(text: str):
    return [t for t in re.split(r"[^a-z0-9]+", text.lower()) if t]


class LexicalScorer:
    """Deterministic relevance from token overlap plus a synonym table."""

    def __init__(self, synonyms: Optional[Mapping] = None):
        self.synonyms = {k: set(v) for k, v in (synonyms or {}).items()}

    def _synonym_hit(self, label_tokens, instruction_tokens) -> bool:
        for t in instruction_tokens:
            if self.synonyms.get(t, set()) & set(label_tokens):
                return True
        for t in label_tokens:
            if self.synonyms.get(t, set()) & set(instruction_tokens):
                return True
        return False

    def score(self, instruction: str, labels: Sequence[str], history: Sequence[str]):
        inst = set(tokenize(instruction))
        visited = set(history)
        out = []
        for label in labels:
            toks = tokenize(label)
            base = len(inst & set(toks)) / len(toks) if toks else 0.0
            if self._synonym_hit(toks, inst):
                base += SYNONYM_BONUS
            if label in visited:
                base -= VISITED_PENALTY
            out.append(min(1.0, max(0.0, base)))
        return out


def score_relevance(scorer, instruction: str, labels: Sequence[str],
                    history: Sequence[str]):
    """Score every label in [0, 1]; malformed scorer output is clamped."""
    if not labels:
        raise ValueError("label list must be non-empty")
    raw = scorer.score(instruction, list(labels), list(history))
    if len(raw) != len(labels):
        raise ValueError("scorer returned wrong number of scores")
    return [min(1.0, max(0.0, float(s))) for s in raw]


def _candidates(topo: TopoMap, params: PlannerParams):
    return [n for n in topo.children() if n.explore_prob > params.explore_threshold]


def _distance(topo: TopoMap, robot: Pose, node, params: PlannerParams) -> float:
    if params.use_graph_distance:
        return topo.traversal_cost(robot, node.id)
    return float(np.linalg.norm(node.position[:2] - robot.xy))


def _pick(entries):
    """Argmax joint score; ties prefer smaller distance, then smaller id."""
    best = None
    for e in entries:
        if best is None:
            best = e
            continue
        if (e.joint > best.joint
                or (e.joint == best.joint
                    and (e.distance < best.distance
                         or (e.distance == best.distance and e.node_id < best.node_id)))):
            best = e
    return best


def rank_subgoals(topo: TopoMap, robot: Pose, scores: Mapping,
                  params: PlannerParams = PlannerParams()):
    """Joint score for every qualifying candidate (the full decision set)."""
    entries = []
    for node in _candidates(topo, params):
        rel = float(scores.get(node.id, 0.0))
        d = _distance(topo, robot, node, params)
        joint = rel * node.confidence * math.exp(-params.distance_decay * d)
        entries.append(Subgoal(node.id, node.position.copy(), rel,
                               node.confidence, d, joint))
    return entries


def select_subgoal(topo: TopoMap, robot: Pose, scores: Mapping,
                   params: PlannerParams = PlannerParams()) -> Optional[Subgoal]:
    """Joint relevance/confidence/cost maximization; None when exhausted."""
    return _pick(rank_subgoals(topo, robot, scores, params))


def rank_subgoals_probability_only(topo: TopoMap, robot: Pose,
                                   params: PlannerParams = PlannerParams()):
    entries = []
    for node in _candidates(topo, params):
        d = _distance(topo, robot, node, params)
        entries.append(Subgoal(node.id, node.position.copy(), 0.0,
                               node.confidence, d, node.confidence))
    return entries


def select_subgoal_probability_only(topo: TopoMap, robot: Pose,
                                    params: PlannerParams = PlannerParams()
                                    ) -> Optional[Subgoal]:
    """Confidence-only ranking baseline; same candidacy and tie rules."""
    return _pick(rank_subgoals_probability_only(topo, robot, params))
