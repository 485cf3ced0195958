"""Association and adaptive fusion of scene- and object-level evidence.

Each candidate target is scored as

    score = prior * obj_conf^object_exp * scene_conf^scene_exp
            * (iou + stabilizer)^overlap_exp
            * (free_space + stabilizer)^freespace_exp

where a missing source contributes a confidence factor of 1 (so
single-source candidates survive, paying only the iou term), and the
winning candidate's confidence is its share of the total score. When both
sources exist the fused image point interpolates between them with weight
obj_conf^object_exp / (obj_conf^object_exp + scene_conf^scene_exp).

Naive averaging, scene-only, and object-only variants are provided as
ablation baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import ImagePoint
from .perception import ObjectDetection, PerceptionFrame, SceneProposal
from .simworld import DepthImage


@dataclass(frozen=True)
class FusionParams:
    object_exp: float = 1.0  # object-confidence exponent, [0.5, 2]
    scene_exp: float = 1.0  # scene-confidence exponent, [0.5, 2]
    overlap_exp: float = 1.0  # spatial-consistency exponent, >= 0
    freespace_exp: float = 1.0  # reachability exponent, >= 0
    stabilizer: float = 1e-3
    priors: dict = field(default_factory=dict)  # label -> prior, default 1.0

    def __post_init__(self):
        if not (0.5 <= self.object_exp <= 2.0 and 0.5 <= self.scene_exp <= 2.0):
            raise ValueError("confidence exponents must lie in [0.5, 2]")
        if self.overlap_exp < 0 or self.freespace_exp < 0:
            raise ValueError("consistency exponents must be non-negative")
        if self.stabilizer <= 0:
            raise ValueError("stabilizer must be positive")

    def prior(self, label: str) -> float:
        return float(self.priors.get(label, 1.0))


@dataclass
class Candidate:
    """One potential target, backed by either or both perception sources."""

    label: str
    scene: Optional[SceneProposal] = None
    detection: Optional[ObjectDetection] = None
    iou: float = 0.0
    free_space: float = 1.0
    score: float = 0.0

    def __post_init__(self):
        if self.scene is None and self.detection is None:
            raise ValueError("candidate needs at least one evidence source")

    def point(self) -> ImagePoint:
        """Best available image point (detection center preferred)."""
        return self.detection.center if self.detection is not None else self.scene.point


@dataclass(frozen=True)
class FusedTarget:
    label: str
    point: ImagePoint
    confidence: float  # (0, 1], winner's share of the total score
    sources: str  # "scene" | "object" | "both"
    blend_weight: Optional[float] = None  # object-point weight when sources == "both"


def rect_iou(a, b) -> float:
    """Intersection over union of two (u0, v0, u1, v1) rectangles."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return float(inter / (area_a + area_b - inter))


def scene_region(p: SceneProposal):
    h = p.region_halfwidth
    return (p.point.u - h, p.point.v - h, p.point.u + h, p.point.v + h)


def associate(frame: PerceptionFrame) -> list:
    """Pair scene proposals with object detections of the same label.

    Within each label group the pairing maximizes total IoU over pairs with
    IoU > 0 (optimal assignment, not first-come greedy); everything left
    over becomes a single-source candidate with iou = 0.
    """
    labels = []
    for p in frame.scene:
        if p.label not in labels:
            labels.append(p.label)
    for d in frame.objects:
        if d.label not in labels:
            labels.append(d.label)

    out = []
    for label in labels:
        props = [p for p in frame.scene if p.label == label]
        dets = [d for d in frame.objects if d.label == label]
        matched_p, matched_d = set(), set()
        if props and dets:
            iou = np.zeros((len(props), len(dets)))
            for i, p in enumerate(props):
                for j, d in enumerate(dets):
                    iou[i, j] = rect_iou(scene_region(p), d.box)
            rows, cols = linear_sum_assignment(-iou)
            for i, j in zip(rows, cols):
                if iou[i, j] > 0.0:
                    matched_p.add(i)
                    matched_d.add(j)
                    out.append(Candidate(label=label, scene=props[i],
                                         detection=dets[j], iou=float(iou[i, j])))
        for i, p in enumerate(props):
            if i not in matched_p:
                out.append(Candidate(label=label, scene=p))
        for j, d in enumerate(dets):
            if j not in matched_d:
                out.append(Candidate(label=label, detection=d))
    return out


def compute_kappa(depth: DepthImage, p: ImagePoint, dist: Optional[float] = None,
                  n_samples: int = 10, margin: float = 0.3) -> float:
    """Coarse free-space fraction along the view sweep toward an image point.

    Samples columns from the straight-ahead column to the target column and
    counts how many still measure depth beyond the candidate's distance
    (minus a margin). 1.0 means a fully clear approach sector.
    """
    if dist is None:
        dist = depth.at(p)
    u_center = float(np.argmin(np.abs(depth.bearings)))
    fracs = (np.arange(n_samples) + 1) / n_samples
    us = u_center + fracs * (p.u - u_center)
    free = sum(1 for u in us if depth.at(u) > dist - margin)
    return free / n_samples


def _confidences(c: Candidate):
    obj = c.detection.confidence if c.detection is not None else None
    scn = c.scene.confidence if c.scene is not None else None
    return obj, scn


def candidate_score(c: Candidate, params: FusionParams) -> float:
    obj, scn = _confidences(c)
    s = params.prior(c.label)
    if obj is not None:
        s *= obj ** params.object_exp
    if scn is not None:
        s *= scn ** params.scene_exp
    s *= (c.iou + params.stabilizer) ** params.overlap_exp
    s *= (c.free_space + params.stabilizer) ** params.freespace_exp
    return s


def _argmax(cands, scores) -> int:
    """Index of the largest score; ties go to larger object confidence,
    then lexicographic label order."""
    best = 0
    for i in range(1, len(cands)):
        bc, bs = cands[best], scores[best]
        obj_i, _ = _confidences(cands[i])
        obj_b, _ = _confidences(bc)
        oi = obj_i if obj_i is not None else -1.0
        ob = obj_b if obj_b is not None else -1.0
        s = scores[i]
        if s > bs or (s == bs and (oi > ob or (oi == ob and cands[i].label < bc.label))):
            best = i
    return best


def _normalized(scores):
    total = float(sum(scores))
    if total <= 0.0:
        # no usable evidence mass; fall back to uniform so the tie rule decides
        return [1.0] * len(scores), float(len(scores))
    return scores, total


def _blend_point(c: Candidate, w: float) -> ImagePoint:
    pd, ps = c.detection.center, c.scene.point
    return ImagePoint(w * pd.u + (1 - w) * ps.u, w * pd.v + (1 - w) * ps.v)


def fuse(cands, params: FusionParams = FusionParams()):
    """Adaptive fusion: score, normalize, pick the winner, blend its point."""
    if not cands:
        return None
    scores = [candidate_score(c, params) for c in cands]
    for c, s in zip(cands, scores):
        c.score = s
    scores, total = _normalized(scores)
    k = _argmax(cands, scores)
    winner = cands[k]
    conf = scores[k] / total
    obj, scn = _confidences(winner)
    if obj is not None and scn is not None:
        denom = obj ** params.object_exp + scn ** params.scene_exp
        w = obj ** params.object_exp / denom if denom > 0 else 0.5
        return FusedTarget(winner.label, _blend_point(winner, w), conf, "both", w)
    if obj is not None:
        return FusedTarget(winner.label, winner.detection.center, conf, "object")
    return FusedTarget(winner.label, winner.scene.point, conf, "scene")


def fuse_naive(cands, params: FusionParams = FusionParams()):
    """Fixed 1:1 averaging baseline; a missing source counts as zero."""
    if not cands:
        return None
    scores = []
    for c in cands:
        obj, scn = _confidences(c)
        scores.append(((obj or 0.0) + (scn or 0.0)) / 2.0)
    scores, total = _normalized(scores)
    k = _argmax(cands, scores)
    winner = cands[k]
    conf = scores[k] / total
    obj, scn = _confidences(winner)
    if obj is not None and scn is not None:
        return FusedTarget(winner.label, _blend_point(winner, 0.5), conf, "both", 0.5)
    if obj is not None:
        return FusedTarget(winner.label, winner.detection.center, conf, "object")
    return FusedTarget(winner.label, winner.scene.point, conf, "scene")


def fuse_scene_only(cands, params: FusionParams = FusionParams()):
    """Scene-level evidence alone."""
    sub = [c for c in cands if c.scene is not None]
    if not sub:
        return None
    scores, total = _normalized([c.scene.confidence for c in sub])
    k = _argmax(sub, scores)
    winner = sub[k]
    return FusedTarget(winner.label, winner.scene.point, scores[k] / total, "scene")


def fuse_object_only(cands, params: FusionParams = FusionParams()):
    """Object-level evidence alone."""
    sub = [c for c in cands if c.detection is not None]
    if not sub:
        return None
    scores, total = _normalized([c.detection.confidence for c in sub])
    k = _argmax(sub, scores)
    winner = sub[k]
    return FusedTarget(winner.label, winner.detection.center, scores[k] / total, "object")


FUSION_VARIANTS = {
    "adaptive": fuse,
    "naive": fuse_naive,
    "scene": fuse_scene_only,
    "object": fuse_object_only,
}
