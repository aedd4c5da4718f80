"""Image-space proportional control: centroid -> direction vector -> gains ->
low-pass filter -> velocity/yaw-rate command.

Command frame: vx is body-forward (driven by the vertical image offset dy),
vy is body-right (driven by the horizontal offset dx).  On loss the filter
delay lines and the centroid history are cleared and a single reset command
is emitted so the vehicle hovers.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .tracking import TRACKING

# 2nd-order Butterworth-type low-pass, normalized cutoff 0.2 of Nyquist.
DEFAULT_B = (0.0674553, 0.1349105, 0.0674553)
DEFAULT_A = (1.0, -1.1429805, 0.4128016)


@dataclass(frozen=True)
class DirectionVector:
    dx: float
    dy: float
    dz: float
    theta: float


@dataclass(frozen=True)
class ServoGains:
    kx: float = 1.0      # m/s per unit dx
    ky: float = 1.0
    kz: float = 0.5
    yaw_k: float = 0.5   # rad/s per rad

    def __post_init__(self):
        if min(self.kx, self.ky, self.kz, self.yaw_k) < 0:
            raise ValueError("gains must be >= 0")


@dataclass(frozen=True)
class ControlSignal:
    vx: float = 0.0      # body-forward m/s
    vy: float = 0.0      # body-right m/s
    vz: float = 0.0
    yaw_rate: float = 0.0
    reset: bool = False


def direction_vector(centroid, camera, dead_zone_px: float = 10.0,
                     mask_area: float | None = None,
                     area_reference: float | None = None) -> DirectionVector:
    """Map a centroid in image px to the normalized direction vector.

    theta uses atan2 of the center offsets (no dy=0 singularity) and is
    forced to zero inside the dead-zone radius.  dz is zero (altitude hold)
    unless an area reference enables the standoff mode.
    """
    x, y = centroid
    w, h = camera.width, camera.height
    if not (0 <= x <= w and 0 <= y <= h):
        raise ValueError("centroid outside the frame")
    dx = x / w - 0.5
    dy = -(y / h - 0.5)
    off_x = x - w / 2
    off_y = y - h / 2
    if math.hypot(off_x, off_y) <= dead_zone_px:
        theta = 0.0
    else:
        theta = -math.atan2(off_x, off_y)
    dz = 0.0
    if area_reference is not None and mask_area is not None:
        dz = min(0.5, max(-0.5, 1.0 - mask_area / area_reference))
    return DirectionVector(dx, dy, dz, theta)


class IirFilter:
    """Direct-form difference equation y[n] = sum(b*x) - sum(a[1:]*y)."""

    def __init__(self, b=DEFAULT_B, a=DEFAULT_A, channels: int = 4):
        self.b = np.asarray(b, dtype=float)
        self.a = np.asarray(a, dtype=float)
        if self.a[0] != 1.0:
            raise ValueError("a[0] must be 1")
        a_sum = self.a.sum()
        if a_sum == 0.0 or abs(self.b.sum() / a_sum - 1.0) > 1e-6:
            raise ValueError("filter DC gain must be 1")
        if self.a.size > 1 and np.abs(np.roots(self.a)).max() >= 1.0:
            raise ValueError("filter poles must lie strictly inside the unit circle")
        self.channels = channels
        self.reset()

    def reset(self) -> None:
        self._x = np.zeros((self.channels, self.b.size))
        self._y = np.zeros((self.channels, self.a.size - 1)) if self.a.size > 1 else None

    def step(self, values) -> np.ndarray:
        x = np.asarray(values, dtype=float)
        self._x[:, 1:] = self._x[:, :-1]
        self._x[:, 0] = x
        out = self._x @ self.b
        if self._y is not None:
            out -= self._y @ self.a[1:]
            self._y[:, 1:] = self._y[:, :-1]
            self._y[:, 0] = out
        return out


class ServoController:
    """Stateful vision-side controller; one instance per tracking session."""

    def __init__(self, camera, gains: ServoGains | None = None,
                 b=DEFAULT_B, a=DEFAULT_A, dead_zone_px: float = 10.0,
                 area_reference: float | None = None, history_len: int = 8):
        self.camera = camera
        self.gains = gains or ServoGains()
        self.filter = IirFilter(b, a, channels=4)
        self.dead_zone_px = dead_zone_px
        self.area_reference = area_reference
        # Positional queue: recent centroids, telemetry smoothing only.
        self.history: deque = deque(maxlen=history_len)
        self._was_tracking = False

    def step(self, status: str, centroid=None, mask_area: float | None = None) -> ControlSignal:
        """Produce the command for one tick given the tracker status."""
        if status == TRACKING:
            if centroid is None:
                raise ValueError("tracking status requires a centroid")
            d = direction_vector(centroid, self.camera, self.dead_zone_px,
                                 mask_area, self.area_reference)
            f = self.filter.step([d.dx, d.dy, d.dz, d.theta])
            # Clamp filtered values back to the input range so transient
            # overshoot cannot exceed the command bounds.
            fx, fy, fz = np.clip(f[:3], -0.5, 0.5)
            ft = min(math.pi, max(-math.pi, f[3]))
            self.history.append(centroid)
            self._was_tracking = True
            g = self.gains
            return ControlSignal(vx=g.ky * fy, vy=g.kx * fx, vz=g.kz * fz,
                                 yaw_rate=g.yaw_k * ft)
        # Not tracking: hover.  The reset signal fires exactly once per loss
        # episode, clearing the filter state and the positional queue.
        if self._was_tracking:
            self._was_tracking = False
            self.filter.reset()
            self.history.clear()
            return ControlSignal(reset=True)
        return ControlSignal()

    def smoothed_centroid(self) -> tuple[float, float] | None:
        if not self.history:
            return None
        xs = [c[0] for c in self.history]
        ys = [c[1] for c in self.history]
        return (sum(xs) / len(xs), sum(ys) / len(ys))
