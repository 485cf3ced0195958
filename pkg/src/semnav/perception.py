"""Scene- and object-level perceiver contracts plus oracle implementations.

The oracle perceivers derive proposals from simulator ground truth and
corrupt them with a controllable noise model (Gaussian confidence and pixel
jitter, Bernoulli mislabels and misses). Every draw is a pure function of
(world, pose, seed, frame index), so repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .geometry import CameraModel, ImagePoint, Pose
from .simworld import DepthImage, World, visible_objects

_SCENE_STREAM = 1
_OBJECT_STREAM = 2


@dataclass(frozen=True)
class SceneProposal:
    """Scene-level exploratory proposal: a point, label, and confidence."""

    point: ImagePoint
    label: str
    confidence: float  # [0, 1]
    region_halfwidth: float = 40.0  # [px] spatial extent around the point


@dataclass(frozen=True)
class ObjectDetection:
    """Object-level detection: a box, its center, label, and confidence."""

    box: tuple  # (u0, v0, u1, v1) [px]
    center: ImagePoint
    label: str
    confidence: float  # [0, 1]


@dataclass
class PerceptionFrame:
    """All proposals captured at one instant, plus the capture context."""

    scene: list  # of SceneProposal
    objects: list  # of ObjectDetection
    pose: Pose
    depth: DepthImage
    frame_index: int
    degraded: bool = False


@dataclass(frozen=True)
class SceneNoise:
    base_confidence: float = 0.75
    sigma_confidence: float = 0.0
    sigma_px: float = 0.0
    p_mislabel: float = 0.0
    region_halfwidth: float = 40.0  # [px]


@dataclass(frozen=True)
class ObjectNoise:
    base_confidence: float = 0.85
    sigma_confidence: float = 0.0
    sigma_box: float = 0.0  # [px] jitter per box edge
    p_miss: float = 0.0
    p_mislabel: float = 0.0
    min_confidence: float = 0.25  # detections below this are dropped


class ScenePerceiver(Protocol):
    def perceive_scene(self, pose: Pose, depth: DepthImage, frame_index: int) -> list: ...


class ObjectPerceiver(Protocol):
    def perceive_objects(self, pose: Pose, depth: DepthImage, frame_index: int) -> list: ...


def _clamp01(x: float) -> float:
    return float(min(1.0, max(0.0, x)))


def _clamp_point(p: ImagePoint, cam: CameraModel) -> ImagePoint:
    return ImagePoint(
        float(np.clip(p.u, 0.0, cam.width - 1e-6)),
        float(np.clip(p.v, 0.0, cam.height - 1e-6)),
    )


def _wrong_label(rng: np.random.Generator, labels: Sequence[str], true_label: str) -> str:
    others = [l for l in labels if l != true_label]
    if not others:
        return true_label
    return others[int(rng.integers(len(others)))]


class OracleScenePerceiver:
    """Scene-level oracle: one proposal per visible object."""

    def __init__(self, world: World, cam: CameraModel, params: SceneNoise = SceneNoise(),
                 seed: int = 0):
        self.world = world
        self.cam = cam
        self.params = params
        self.seed = seed

    def perceive_scene(self, pose: Pose, depth: DepthImage, frame_index: int) -> list:
        p = self.params
        rng = np.random.default_rng([self.seed, frame_index, _SCENE_STREAM])
        labels = self.world.labels()
        out = []
        for obj, px, _ in visible_objects(self.world, pose, self.cam):
            conf = _clamp01(p.base_confidence + rng.normal(0.0, p.sigma_confidence)
                            if p.sigma_confidence > 0 else p.base_confidence)
            du = rng.normal(0.0, p.sigma_px) if p.sigma_px > 0 else 0.0
            dv = rng.normal(0.0, p.sigma_px) if p.sigma_px > 0 else 0.0
            label = obj.label
            if p.p_mislabel > 0 and rng.random() < p.p_mislabel:
                label = _wrong_label(rng, labels, obj.label)
            out.append(SceneProposal(
                point=_clamp_point(ImagePoint(px.u + du, px.v + dv), self.cam),
                label=label,
                confidence=conf,
                region_halfwidth=p.region_halfwidth,
            ))
        return out


class OracleObjectPerceiver:
    """Object-level oracle: a bounding box per visible, undropped object."""

    def __init__(self, world: World, cam: CameraModel, params: ObjectNoise = ObjectNoise(),
                 seed: int = 0):
        self.world = world
        self.cam = cam
        self.params = params
        self.seed = seed

    def perceive_objects(self, pose: Pose, depth: DepthImage, frame_index: int) -> list:
        p = self.params
        rng = np.random.default_rng([self.seed, frame_index, _OBJECT_STREAM])
        labels = self.world.labels()
        out = []
        for obj, px, z in visible_objects(self.world, pose, self.cam):
            missed = p.p_miss > 0 and rng.random() < p.p_miss
            conf = _clamp01(p.base_confidence + rng.normal(0.0, p.sigma_confidence)
                            if p.sigma_confidence > 0 else p.base_confidence)
            jitter = rng.normal(0.0, p.sigma_box, size=4) if p.sigma_box > 0 else np.zeros(4)
            label = obj.label
            if p.p_mislabel > 0 and rng.random() < p.p_mislabel:
                label = _wrong_label(rng, labels, obj.label)
            if missed or conf < p.min_confidence:
                continue
            hw_u = self.cam.fx * obj.radius / z
            hw_v = self.cam.fy * obj.radius / z
            u0 = px.u - hw_u + jitter[0]
            v0 = px.v - hw_v + jitter[1]
            u1 = px.u + hw_u + jitter[2]
            v1 = px.v + hw_v + jitter[3]
            u0, u1 = sorted((float(np.clip(u0, 0, self.cam.width - 1)),
                             float(np.clip(u1, 0, self.cam.width - 1))))
            v0, v1 = sorted((float(np.clip(v0, 0, self.cam.height - 1)),
                             float(np.clip(v1, 0, self.cam.height - 1))))
            u1 = max(u1, u0 + 1.0)
            v1 = max(v1, v0 + 1.0)
            center = _clamp_point(ImagePoint((u0 + u1) / 2.0, (v0 + v1) / 2.0), self.cam)
            out.append(ObjectDetection(
                box=(u0, v0, u1, v1), center=center, label=label, confidence=conf,
            ))
        return out


def capture_frame(scene_perceiver, object_perceiver, pose: Pose, depth: DepthImage,
                  frame_index: int) -> PerceptionFrame:
    """Run both perceivers over one view and bundle the results."""
    degraded = False
    try:
        scene = scene_perceiver.perceive_scene(pose, depth, frame_index)
    except PerceptionUnavailable:
        scene, degraded = [], True
    try:
        objects = object_perceiver.perceive_objects(pose, depth, frame_index)
    except PerceptionUnavailable:
        objects, degraded = [], True
    return PerceptionFrame(scene=scene, objects=objects, pose=pose, depth=depth,
                           frame_index=frame_index, degraded=degraded)


class PerceptionUnavailable(RuntimeError):
    """Raised by bridge-backed perceivers on timeout or protocol failure."""
