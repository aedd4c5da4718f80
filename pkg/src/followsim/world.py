"""Ground-truth scene: scripted objects, drone state, downward camera, frame rendering.

World frame: x/y on the ground plane, z up.  Yaw psi is measured
counter-clockwise from world +x, so body-forward = (cos psi, sin psi) and
body-right = (sin psi, -cos psi).  The camera looks straight down with
image +x = body-right and image +y = body-backward, which puts
body-forward at the top of the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = math.remainder(a, math.tau)
    if w <= -math.pi:
        w = math.pi
    return w


# ---------------------------------------------------------------------------
# Motion scripts

class StaticPath:
    def __init__(self, x: float, y: float):
        self.x = float(x)
        self.y = float(y)

    def position_at(self, t: float) -> tuple[float, float]:
        return (self.x, self.y)


class CirclePath:
    def __init__(self, center, radius: float, angular_rate: float, phase: float = 0.0):
        self.cx, self.cy = float(center[0]), float(center[1])
        self.radius = float(radius)
        self.angular_rate = float(angular_rate)
        self.phase = float(phase)

    def position_at(self, t: float) -> tuple[float, float]:
        a = self.phase + self.angular_rate * t
        return (self.cx + self.radius * math.cos(a), self.cy + self.radius * math.sin(a))


class WaypointPath:
    """Piecewise-linear path through (t, x, y) samples; endpoints held outside the range."""

    def __init__(self, points):
        pts = [(float(t), float(x), float(y)) for t, x, y in points]
        if not pts:
            raise ValueError("waypoint path needs at least one point")
        for a, b in zip(pts, pts[1:]):
            if b[0] <= a[0]:
                raise ValueError("waypoint times must be strictly increasing")
        self.points = pts

    def position_at(self, t: float) -> tuple[float, float]:
        pts = self.points
        if t <= pts[0][0]:
            return (pts[0][1], pts[0][2])
        if t >= pts[-1][0]:
            return (pts[-1][1], pts[-1][2])
        for a, b in zip(pts, pts[1:]):
            if t <= b[0]:
                f = (t - a[0]) / (b[0] - a[0])
                return (a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2]))
        return (pts[-1][1], pts[-1][2])  # unreachable


def motion_from_config(cfg: dict):
    kind = cfg["kind"]
    if kind == "static":
        x, y = cfg["position"]
        return StaticPath(x, y)
    if kind == "circle":
        return CirclePath(cfg["center"], cfg["radius"], cfg["angular_rate"], cfg.get("phase", 0.0))
    if kind == "waypoints":
        return WaypointPath(cfg["points"])
    raise ValueError(f"unknown motion kind: {kind!r}")


# ---------------------------------------------------------------------------
# Shapes and scene objects

class Disk:
    def __init__(self, radius: float):
        if radius <= 0:
            raise ValueError("disk radius must be > 0")
        self.radius = float(radius)

    def contains(self, xs: np.ndarray, ys: np.ndarray, cx: float, cy: float) -> np.ndarray:
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= self.radius ** 2


class Rect:
    """Axis-aligned (world axes) rectangle, w along x and h along y."""

    def __init__(self, w: float, h: float):
        if w <= 0 or h <= 0:
            raise ValueError("rectangle extents must be > 0")
        self.w = float(w)
        self.h = float(h)

    def contains(self, xs: np.ndarray, ys: np.ndarray, cx: float, cy: float) -> np.ndarray:
        return (np.abs(xs - cx) <= self.w / 2) & (np.abs(ys - cy) <= self.h / 2)


def shape_from_config(cfg: dict):
    kind = cfg["kind"]
    if kind == "disk":
        return Disk(cfg["radius"])
    if kind == "rect":
        return Rect(cfg["width"], cfg["height"])
    raise ValueError(f"unknown shape kind: {kind!r}")


@dataclass
class SceneObject:
    instance_id: int
    class_id: int
    shape: object
    z_order: int
    motion: object
    # None = active from t=0; otherwise hidden until activated (occlude_start
    # event), with the motion clock starting at activation.
    active_from: float | None = None

    def __post_init__(self):
        if self.instance_id <= 0:
            raise ValueError("instance_id must be a positive integer")
        if self.class_id <= 0:
            raise ValueError("class_id 0 is reserved for background")

    def is_active(self, t: float) -> bool:
        return self.active_from is None or t >= self.active_from

    def position_at(self, t: float) -> tuple[float, float]:
        t0 = self.active_from or 0.0
        return self.motion.position_at(t - t0)


@dataclass
class DroneState:
    p: np.ndarray            # (x, y, z) m, z up
    psi: float = 0.0         # yaw rad in (-pi, pi]
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    psi_dot: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).copy()
        self.v = np.asarray(self.v, dtype=float).copy()
        self.psi = wrap_angle(self.psi)

    def copy(self) -> "DroneState":
        return DroneState(self.p.copy(), self.psi, self.v.copy(), self.psi_dot)


@dataclass(frozen=True)
class CameraModel:
    width: int = 640     # px
    height: int = 480
    focal: float = 400.0  # px

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.focal <= 0:
            raise ValueError("camera dimensions and focal length must be > 0")


def body_axes(psi: float) -> tuple[np.ndarray, np.ndarray]:
    """World-frame unit vectors (forward, right) for yaw psi."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([c, s]), np.array([s, -c])


def project_to_image(camera: CameraModel, drone: DroneState, ground_point) -> tuple[float, float] | None:
    """Project a ground point to image px; None when outside [0,W)x[0,H)."""
    z = drone.p[2]
    if z <= 0:
        raise ValueError("camera height must be > 0")
    dx = ground_point[0] - drone.p[0]
    dy = ground_point[1] - drone.p[1]
    fwd, right = body_axes(drone.psi)
    u = camera.width / 2 + camera.focal * (dx * right[0] + dy * right[1]) / z
    v = camera.height / 2 - camera.focal * (dx * fwd[0] + dy * fwd[1]) / z
    if 0 <= u < camera.width and 0 <= v < camera.height:
        return (u, v)
    return None


class Frame:
    """One rendered camera frame with per-pixel ground truth.

    id_map holds instance ids (0 = background), class_map the matching class
    ids, render a grayscale view for streaming.  Per-pixel descriptors are
    provided lazily by the attached descriptor model so that pooling over a
    mask and materializing the full field yield identical values.
    """

    def __init__(self, seq: int, t: float, camera: CameraModel, id_map: np.ndarray,
                 class_map: np.ndarray, render: np.ndarray, descriptors=None):
        self.seq = seq
        self.t = t
        self.camera = camera
        self.width = camera.width
        self.height = camera.height
        self.id_map = id_map
        self.class_map = class_map
        self.render = render
        self.descriptors = descriptors
        self._field = None

    def descriptor_mean(self, flat_pixels: np.ndarray) -> np.ndarray:
        """Arithmetic mean of the descriptor field over flat pixel indices."""
        return self.descriptors.mean_over(self, flat_pixels)

    def descriptor_at(self, x: int, y: int) -> np.ndarray:
        return self.descriptors.at(self, x, y)

    def descriptor_field(self) -> np.ndarray:
        """Full H x W x d descriptor field (materialized once, test-sized frames only)."""
        if self._field is None:
            self._field = self.descriptors.full_field(self)
        return self._field


def _render_gray(id_map: np.ndarray) -> np.ndarray:
    # Deterministic intensity per instance id; background stays dark.
    out = np.full(id_map.shape, 24, dtype=np.uint8)
    for k in np.unique(id_map):
        if k == 0:
            continue
        out[id_map == k] = 90 + (int(k) * 53) % 150
    return out


class WorldState:
    """Scene objects + drone + clock; the single mutable simulation value."""

    def __init__(self, objects: list[SceneObject], drone: DroneState, camera: CameraModel,
                 t: float = 0.0):
        ids = [o.instance_id for o in objects]
        if len(ids) != len(set(ids)):
            raise ValueError("instance ids must be unique")
        self.objects = list(objects)
        self.drone = drone
        self.camera = camera
        self.t = t

    def object_by_id(self, instance_id: int) -> SceneObject:
        for o in self.objects:
            if o.instance_id == instance_id:
                return o
        raise KeyError(instance_id)

    def step(self, dt: float, plant=None, setpoint=None) -> None:
        """Advance sim time by dt; object positions follow their scripts implicitly.

        When a plant callable and setpoint are given the drone is advanced
        toward the setpoint (see the offboard module for the plant law).
        """
        if dt <= 0:
            raise ValueError("dt must be > 0")
        if plant is not None and setpoint is not None:
            self.drone = plant(self.drone, setpoint, dt)
        self.t += dt

    def render_frame(self, descriptor_model, seq: int) -> Frame:
        """Rasterize the scene under the drone's camera at the current time.

        Pixel-center-in-shape test, no anti-aliasing; a pixel carries the
        highest-z_order object covering it.
        """
        cam = self.camera
        z = self.drone.p[2]
        if z <= 0:
            raise ValueError("drone must be above the ground plane")
        ix = np.arange(cam.width, dtype=float) + 0.5
        iy = np.arange(cam.height, dtype=float) + 0.5
        # Invert the projection for every pixel center.
        rc = (ix[None, :] - cam.width / 2) * z / cam.focal     # body-right m
        fc = (cam.height / 2 - iy[:, None]) * z / cam.focal    # body-forward m
        fwd, right = body_axes(self.drone.psi)
        gx = self.drone.p[0] + rc * right[0] + fc * fwd[0]
        gy = self.drone.p[1] + rc * right[1] + fc * fwd[1]

        id_map = np.zeros((cam.height, cam.width), dtype=np.int32)
        class_map = np.zeros_like(id_map)
        order = sorted((o for o in self.objects if o.is_active(self.t)),
                       key=lambda o: (o.z_order, o.instance_id))
        for obj in order:
            cx, cy = obj.position_at(self.t)
            hit = obj.shape.contains(gx, gy, cx, cy)
            id_map[hit] = obj.instance_id
            class_map[hit] = obj.class_id

        frame = Frame(seq, self.t, cam, id_map, class_map, _render_gray(id_map),
                      descriptors=descriptor_model.frame_stream(seq) if descriptor_model else None)
        return frame
