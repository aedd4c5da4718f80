"""Scenario files: JSON schema, validation, seeding, and canonical hashing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .perception import Query
from .servo import DEFAULT_A, DEFAULT_B, ServoGains
from .tracking import TrackerParams
from .world import (CameraModel, DroneState, SceneObject, WorldState,
                    motion_from_config, shape_from_config)


class ScenarioError(ValueError):
    """Invalid or inconsistent scenario configuration."""


EVENT_KINDS = {"occlude_start", "assist_nudge", "human_answer",
               "set_redetect_level", "assist_resume"}


def derive_seed(seed: int, tag: str) -> int:
    """Stable sub-seed derivation (not Python hash(), which is salted)."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFFFFFFFFFFFFFF

def _query_from_config(cfg: dict) -> Query:
    kind = cfg["kind"]
    if kind == "click":
        return Query.click(cfg["x"], cfg["y"])
    if kind == "bbox":
        return Query.bbox(cfg["x0"], cfg["y0"], cfg["x1"], cfg["y1"])
    if kind == "template":
        return Query.template(cfg["class_id"])
    raise ScenarioError(f"unknown query kind {kind!r}")


@dataclass
class Event:
    t: float
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass
class Scenario:
    """Validated scenario; build_world()/raw config are both kept so runs can
    be hashed exactly as configured."""

    raw: dict
    name: str
    seed: int
    dt: float
    duration: float
    camera: CameraModel
    drone_init: dict
    objects_cfg: list[dict]
    descriptor_cfg: dict
    tracker: TrackerParams
    redetect_level: int
    gains: ServoGains
    servo_cfg: dict
    query: Query | None
    query_tick: int
    events: list[Event]
    target_instance: int
    oversegment: dict
    assist_timeout: float

    @property
    def ticks(self) -> int:
        return int(round(self.duration / self.dt))

    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def build_world(self) -> WorldState:
        objects = []
        for cfg in self.objects_cfg:
            objects.append(SceneObject(
                instance_id=int(cfg["instance_id"]),
                class_id=int(cfg["class_id"]),
                shape=shape_from_config(cfg["shape"]),
                z_order=int(cfg.get("z_order", 0)),
                motion=motion_from_config(cfg["motion"]),
                active_from=math.inf if cfg.get("await_event") else None,
            ))
        d = self.drone_init
        drone = DroneState(p=np.asarray(d.get("position", [0.0, 0.0, 4.0]), dtype=float),
                           psi=float(d.get("yaw", 0.0)))
        return WorldState(objects, drone, self.camera)

    def class_ids(self) -> list[int]:
        ids = {int(o["class_id"]) for o in self.objects_cfg}
        if self.query is not None and self.query.kind == "template":
            ids.add(self.query.class_id)
        return sorted(ids)


def load_scenario(source, seed_override: int | None = None) -> Scenario:
    """Load and validate a scenario from a path, JSON string, or dict."""
    if isinstance(source, (str, Path)) and Path(str(source)).exists():
        raw = json.loads(Path(source).read_text(encoding="utf-8"))
    elif isinstance(source, str):
        raw = json.loads(source)
    elif isinstance(source, dict):
        raw = json.loads(json.dumps(source))   # private copy
    else:
        raise ScenarioError(f"cannot load scenario from {type(source)}")

    try:
        return _parse(raw, seed_override)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def _parse(raw: dict, seed_override: int | None) -> Scenario:
    if seed_override is not None:
        raw = dict(raw)
        raw["seed"] = int(seed_override)
    seed = int(raw.get("seed", 0))
    dt = float(raw.get("dt", 0.05))
    duration = float(raw["duration"])
    if dt <= 0 or duration <= 0:
        raise ScenarioError("dt and duration must be > 0")

    cam_cfg = raw.get("camera", {})
    camera = CameraModel(width=int(cam_cfg.get("width", 640)),
                         height=int(cam_cfg.get("height", 480)),
                         focal=float(cam_cfg.get("focal", 400.0)))

    objects_cfg = raw.get("objects", [])
    ids = [int(o["instance_id"]) for o in objects_cfg]
    if len(ids) != len(set(ids)):
        raise ScenarioError("object instance ids must be unique")

    desc = dict(raw.get("descriptor", {}))
    desc.setdefault("dim", 16)
    desc.setdefault("sigma", 0.05)
    desc.setdefault("seed", derive_seed(seed, "descriptor"))

    tr_cfg = raw.get("tracker", {})
    tracker = TrackerParams(
        alpha=float(tr_cfg.get("alpha", 0.5)),
        iou_min=float(tr_cfg.get("iou_min", 0.05)),
        s_min=float(tr_cfg.get("s_min", 0.6)),
        thresh_redetect=float(tr_cfg.get("thresh_redetect", 0.8)),
        tau=int(tr_cfg.get("tau", 10)),
    )
    level = int(tr_cfg.get("redetect_level", 3))
    if level not in (1, 2, 3):
        raise ScenarioError("redetect_level must be 1, 2, or 3")

    sv = raw.get("servo", {})
    gains = ServoGains(kx=float(sv.get("kx", 1.0)), ky=float(sv.get("ky", 1.0)),
                       kz=float(sv.get("kz", 0.5)), yaw_k=float(sv.get("yaw_k", 0.5)))
    servo_cfg = {
        "b": sv.get("filter_b", list(DEFAULT_B)),
        "a": sv.get("filter_a", list(DEFAULT_A)),
        "dead_zone_px": float(sv.get("dead_zone_px", 10.0)),
        "area_reference": sv.get("area_reference"),
    }

    query_cfg = raw.get("query")
    query = _query_from_config(query_cfg) if query_cfg else None
    query_tick = int(query_cfg.get("tick", 0)) if query_cfg else 0

    events = []
    for ev in raw.get("events", []):
        kind = ev["kind"]
        if kind not in EVENT_KINDS:
            raise ScenarioError(f"unknown event kind {kind!r}")
        payload = {k: v for k, v in ev.items() if k not in ("t", "kind")}
        events.append(Event(t=float(ev["t"]), kind=kind, payload=payload))
    if any(b.t < a.t for a, b in zip(events, events[1:])):
        raise ScenarioError("events must be time-sorted")

    target_instance = int(raw.get("target_instance", ids[0] if ids else 0))
    if objects_cfg and target_instance not in ids:
        raise ScenarioError(f"target_instance {target_instance} not in scene")

    overseg = raw.get("oversegment", {})
    oversegment = {"enabled": bool(overseg.get("enabled", False)),
                   "p_split": float(overseg.get("p_split", 0.0))}

    return Scenario(
        raw=raw,
        name=str(raw.get("name", "scenario")),
        seed=seed,
        dt=dt,
        duration=duration,
        camera=camera,
        drone_init=raw.get("drone", {}),
        objects_cfg=objects_cfg,
        descriptor_cfg=desc,
        tracker=tracker,
        redetect_level=level,
        gains=gains,
        servo_cfg=servo_cfg,
        query=query,
        query_tick=query_tick,
        events=events,
        target_instance=target_instance,
        oversegment=oversegment,
        assist_timeout=float(raw.get("assist_timeout", 5.0)),
    )
