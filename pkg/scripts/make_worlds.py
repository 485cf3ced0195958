#!/usr/bin/env python3
"""Build the five bundled benchmark worlds and write them to worlds/.

Layouts are hand-placed rather than sampled so corridors stay generous,
every corner of the arena has a landmark within sensor range, and the goal
is always discoverable from some other landmark; run with --check to verify
noiseless end-to-end success over the benchmark seeds.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from semnav.geometry import CameraModel, Pose
from semnav.simworld import (
    Circle,
    KinematicLimits,
    SemanticObject,
    World,
    save_world,
)
from semnav.worldgen import DEFAULT_CAMERA, _box

ROOT = Path(__file__).resolve().parent.parent


def obj(oid, label, x, y, r=0.3, goal=False):
    return SemanticObject(id=oid, label=label, position=np.array([x, y]),
                          radius=r, is_goal=goal)


def build_worlds():
    cam = CameraModel(**DEFAULT_CAMERA)
    limits = KinematicLimits()
    common = dict(camera=cam, limits=limits, start=Pose.from_xy(0.0, 0.0, 0.0))

    worlds = []

    worlds.append(World(
        name="garden",
        bounds=(-8.0, -6.0, 8.0, 6.0),
        obstacles=[
            Circle(np.array([2.8, -2.0]), 0.55),  # tree
            Circle(np.array([-3.0, -2.6]), 0.5),  # tree
            _box(-1.8, 2.4, 1.4, 0.8),            # hedge
        ],
        objects=[
            obj("bin", "green bin", 5.8, 3.8, 0.35, goal=True),
            obj("pot", "flower pot", -5.4, 3.6, 0.3),
            obj("bench", "garden bench", -5.6, -4.0, 0.35),
            obj("fountain", "stone fountain", 5.2, -4.0, 0.35),
            obj("statue", "garden statue", 0.4, -4.6, 0.3),
            obj("trellis", "rose trellis", 0.8, 4.6, 0.3),
        ],
        seed=101, **common,
    ))

    worlds.append(World(
        name="sidewalk",
        bounds=(-8.0, -6.0, 8.0, 6.0),
        obstacles=[
            _box(2.8, 2.0, 1.2, 0.9),              # planter
            Circle(np.array([-2.6, 1.8]), 0.45),   # hydrant
            _box(-3.2, -2.4, 1.1, 1.1),            # kiosk
        ],
        objects=[
            obj("sign", "traffic sign", 6.2, 0.4, 0.3, goal=True),
            obj("mail", "mail box", -6.2, 0.8, 0.3),
            obj("bench", "street bench", 0.6, 4.6, 0.35),
            obj("trash", "trash can", -0.8, -4.6, 0.3),
            obj("rack", "bike rack", -5.6, 4.4, 0.3),
            obj("meter", "parking meter", 5.4, -4.4, 0.3),
        ],
        seed=102, **common,
    ))

    worlds.append(World(
        name="road",
        bounds=(-9.0, -6.0, 9.0, 6.0),
        obstacles=[
            _box(1.6, 2.8, 2.0, 1.0),              # parked truck
            _box(-4.2, 0.4, 1.7, 0.9, angle=0.3),  # parked van
            Circle(np.array([3.0, -1.8]), 0.5),    # barrier drum
        ],
        objects=[
            obj("station", "bus station", 7.0, -3.6, 0.35, goal=True),
            obj("lamp", "street lamp", -6.8, -3.4, 0.3),
            obj("cone", "traffic cone", 0.6, -4.6, 0.3),
            obj("board", "sign board", -6.6, 4.0, 0.3),
            obj("booth", "phone booth", 6.6, 3.8, 0.35),
            obj("bollard", "steel bollard", 0.2, 4.6, 0.3),
        ],
        seed=103, **common,
    ))

    worlds.append(World(
        name="warehouse_a",
        bounds=(-8.0, -6.0, 8.0, 6.0),
        obstacles=[
            _box(-2.2, 2.6, 2.8, 0.8),            # shelf row
            _box(2.2, -2.6, 2.8, 0.8),            # shelf row
            Circle(np.array([-2.8, -2.2]), 0.5),  # drum
        ],
        objects=[
            obj("cart", "loading cart", 6.2, 3.8, 0.35, goal=True),
            obj("pallet", "pallet stack", -6.2, -4.0, 0.35),
            obj("forklift", "fork lift", -6.0, 3.8, 0.35),
            obj("barrel", "steel barrel", 5.8, -4.2, 0.35),
            obj("crate", "supply crate", 0.6, -4.6, 0.3),
            obj("ladder", "step ladder", 0.4, 4.6, 0.3),
        ],
        seed=104, **common,
    ))

    worlds.append(World(
        name="warehouse_b",
        bounds=(-8.0, -6.0, 8.0, 6.0),
        obstacles=[
            _box(0.4, 2.4, 2.2, 0.8),                  # crate pile
            _box(-3.4, -1.6, 0.8, 2.0, angle=0.15),    # rack
            Circle(np.array([3.2, -1.0]), 0.5),        # coil
        ],
        objects=[
            obj("ext", "fire extinguisher", 6.4, -3.8, 0.3, goal=True),
            obj("pallet", "pallet stack", -6.4, 3.6, 0.35),
            obj("toolbox", "tool box", -6.2, -4.2, 0.3),
            obj("hose", "hose reel", 6.0, 3.9, 0.35),
            obj("drum", "oil drum", 0.2, -4.6, 0.3),
            obj("workbench", "work bench", 0.0, 4.6, 0.35),
        ],
        seed=105, **common,
    ))

    return worlds


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=str(ROOT / "worlds"))
    parser.add_argument("--check", action="store_true",
                        help="run noiseless benchmark trials on each world")
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    worlds = build_worlds()
    for w in worlds:
        path = out / f"{w.name}.json"
        save_world(w, path)
        print(f"wrote {path}")

    if args.check:
        from semnav.batch import build_components, default_mission_config, run_batch
        from semnav.metrics import evaluate

        ok = True
        for w in worlds:
            records = run_batch(w, default_mission_config(w),
                                lambda s: build_components(w, s),
                                trials=20, base_seed=w.seed)
            rep = evaluate(records, w)
            print(f"{w.name:12s} SR={rep.sr:.2f} OASR={rep.oasr:.2f} SPL={rep.spl:.2f}")
            ok &= rep.sr >= 0.95 and rep.oasr == 1.0
        sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
