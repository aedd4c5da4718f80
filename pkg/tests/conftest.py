"""Shared scene builders and session-scoped run batches."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from followsim.perception import DescriptorModel, segment
from followsim.runner import run_headless
from followsim.world import (CameraModel, Disk, DroneState, Rect, SceneObject,
                             StaticPath, WorldState)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def static_disk(instance_id, class_id, xy, radius=0.3, z_order=1) -> SceneObject:
    return SceneObject(instance_id=instance_id, class_id=class_id,
                       shape=Disk(radius), z_order=z_order,
                       motion=StaticPath(*xy))


def static_rect(instance_id, class_id, xy, w=1.0, h=1.0, z_order=5) -> SceneObject:
    return SceneObject(instance_id=instance_id, class_id=class_id,
                       shape=Rect(w, h), z_order=z_order,
                       motion=StaticPath(*xy))


def make_scene(objects, sigma=0.0, seed=3, cam=(64, 64, 100.0), drone=(0.0, 0.0, 4.0),
               similar=None, seq=0):
    """Render one frame of a static scene; returns (frame, masks, model, world)."""
    camera = CameraModel(*cam[:2], cam[2])
    world = WorldState(list(objects), DroneState(np.asarray(drone, dtype=float)), camera)
    class_ids = sorted({o.class_id for o in objects}) or [1]
    model = DescriptorModel(class_ids, dim=16, sigma=sigma, seed=seed, similar=similar)
    frame = world.render_frame(model, seq=seq)
    return frame, segment(frame), model, world


# ---------------------------------------------------------------------------
# Scenario factories (compact occlusion scenes used by the seeded batches)

def quick_occlusion_scenario(seed: int, level: int, distractor: bool = False,
                             similar_cosine: float = 0.785) -> dict:
    """Static target, occluder sweeping across it; per-seed jittered geometry.

    With distractor=True a look-alike object (engineered prototype cosine to
    the target class) sits in view for the re-detection levels to confuse.
    """
    rng = np.random.Generator(np.random.PCG64(seed + 1000))
    speed = 0.3 + 0.25 * rng.random()
    oy = -0.05 + 0.1 * rng.random()
    objects = [
        {"instance_id": 1, "class_id": 1, "z_order": 1,
         "shape": {"kind": "disk", "radius": 0.25},
         "motion": {"kind": "static", "position": [0.0, 0.0]}},
        {"instance_id": 2, "class_id": 2, "z_order": 5,
         "shape": {"kind": "rect", "width": 1.0, "height": 0.9},
         "motion": {"kind": "waypoints",
                    "points": [[0.0, -1.7, round(oy, 4)],
                               [round(3.9 / speed, 4), 2.2, round(oy, 4)]]}},
    ]
    descriptor = {"dim": 16, "sigma": 0.05}
    if distractor:
        objects.append({"instance_id": 3, "class_id": 3, "z_order": 1,
                        "shape": {"kind": "disk", "radius": 0.25},
                        "motion": {"kind": "static", "position": [0.7, 0.8]}})
        descriptor["similar"] = [{"class_id": 3, "base": 1, "cosine": similar_cosine}]
    return {
        "name": "quick-occlusion", "seed": seed, "dt": 0.05, "duration": 10.0,
        "camera": {"width": 96, "height": 96, "focal": 158.0},
        "drone": {"position": [0.0, 0.0, 4.0]},
        "descriptor": descriptor,
        "objects": objects,
        "query": {"kind": "template", "class_id": 1, "tick": 0},
        "tracker": {"redetect_level": level},
        "target_instance": 1,
    }


def run_reacquisition_batch(level: int, distractor: bool, seeds=range(100)) -> dict:
    """First-reacquisition outcome counts over seeded occlusion runs."""
    counts = {"correct": 0, "false": 0, "none": 0}
    for seed in seeds:
        log = run_headless(quick_occlusion_scenario(seed, level, distractor))
        reacq = log.summary()["reacquisitions"]
        if not reacq:
            counts["none"] += 1
        elif reacq[0] == 1:
            counts["correct"] += 1
        else:
            counts["false"] += 1
    return counts


@pytest.fixture(scope="session")
def occlusion_batches():
    """100-seed outcome counts for levels 1/3, with and without the look-alike."""
    return {
        ("plain", 1): run_reacquisition_batch(1, distractor=False),
        ("plain", 3): run_reacquisition_batch(3, distractor=False),
        ("lookalike", 1): run_reacquisition_batch(1, distractor=True),
        ("lookalike", 3): run_reacquisition_batch(3, distractor=True),
    }


@pytest.fixture(scope="session")
def circle_run():
    import time

    from followsim.dtw import evaluate_run

    t0 = time.time()
    log = run_headless(str(SCENARIO_DIR / "circle.json"))
    wall = time.time() - t0
    return {"log": log, "report": evaluate_run(log.records), "wall": wall}


@pytest.fixture(scope="session")
def occluded_run():
    from followsim.dtw import evaluate_run

    log = run_headless(str(SCENARIO_DIR / "circle_occluded.json"))
    return {"log": log, "report": evaluate_run(log.records)}
