"""Offboard-side control: velocity commands integrated into trajectory
setpoints, the heartbeat contract, manual position-assist, and the plant
that chases setpoints with a first-order lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .servo import ControlSignal
from .world import DroneState, body_axes, wrap_angle

OFFBOARD = "OFFBOARD"
POSITION_ASSIST = "POSITION_ASSIST"

MIN_ASSIST_Z = 0.2  # m, floor guard for manual nudges


@dataclass
class TrajectorySetpoint:
    p: np.ndarray           # world-frame target position
    v: np.ndarray           # world-frame velocity (telemetry; plant tracks p)
    psi: float
    stamp: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).copy()
        self.v = np.asarray(self.v, dtype=float).copy()
        if not (np.isfinite(self.p).all() and np.isfinite(self.v).all() and math.isfinite(self.psi)):
            raise ValueError("setpoint must be finite")
        self.psi = wrap_angle(self.psi)


def body_to_world(vx: float, vy: float, psi: float) -> np.ndarray:
    """Rotate a body (forward, right) velocity into the world frame."""
    fwd, right = body_axes(psi)
    return np.array([vx * fwd[0] + vy * right[0], vx * fwd[1] + vy * right[1]])


def integrate_setpoint(current: DroneState, u: ControlSignal, dt: float,
                       stamp: float = 0.0) -> TrajectorySetpoint:
    """p_target = p_current + v_world * dt; yaw integrated the same way."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if u.reset:
        raise ValueError("reset commands are handled by handle_reset")
    vw = body_to_world(u.vx, u.vy, current.psi)
    v_world = np.array([vw[0], vw[1], u.vz])
    return TrajectorySetpoint(p=current.p + v_world * dt, v=v_world,
                              psi=wrap_angle(current.psi + u.yaw_rate * dt), stamp=stamp)


def handle_reset(current: DroneState, stamp: float = 0.0) -> TrajectorySetpoint:
    """Hover in place: hold pose, zero velocity.  Idempotent."""
    return TrajectorySetpoint(p=current.p.copy(), v=np.zeros(3), psi=current.psi, stamp=stamp)


def plant_step(state: DroneState, sp: TrajectorySetpoint, dt: float,
               tau: float = 0.3, v_max: float = 2.0,
               psi_rate_max: float = math.pi) -> DroneState:
    """Setpoint-chasing plant: velocity feed-forward plus first-order lag on
    the position error, with a speed clamp.

    Position setpoints are re-anchored to the vehicle every tick, so without
    the feed-forward term the achievable speed would collapse to dt/tau of
    the command; the blend mirrors how autopilot position controllers
    consume combined position+velocity setpoints.  A pure step setpoint
    (v = 0) still decays exponentially with time constant tau.  tau <= 0
    snaps to the setpoint (ideal plant), making integration exact.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if tau <= 0:
        return DroneState(sp.p.copy(), sp.psi, sp.v.copy(),
                          wrap_angle(sp.psi - state.psi) / dt)
    v_cmd = sp.v + (sp.p - state.p) / tau
    speed = float(np.linalg.norm(v_cmd))
    if speed > v_max:
        v_cmd = v_cmd * (v_max / speed)
    rate = wrap_angle(sp.psi - state.psi) / tau
    rate = min(psi_rate_max, max(-psi_rate_max, rate))
    return DroneState(state.p + v_cmd * dt, wrap_angle(state.psi + rate * dt), v_cmd, rate)


@dataclass
class OffboardController:
    """Controller-node state: mode, heartbeat counter, last emitted setpoint."""

    plant_tau: float = 0.3
    v_max: float = 2.0
    psi_rate_max: float = math.pi
    mode: str = OFFBOARD
    heartbeat_count: int = 0
    last_setpoint: TrajectorySetpoint | None = None
    _assist_target: np.ndarray | None = field(default=None, repr=False)
    _assist_psi: float = 0.0

    def tick(self, current: DroneState, u: ControlSignal, dt: float,
             stamp: float = 0.0) -> TrajectorySetpoint:
        """One control tick: heartbeat, then the setpoint for the plant."""
        if self.mode == OFFBOARD:
            self.heartbeat_count += 1
            sp = handle_reset(current, stamp) if u.reset else integrate_setpoint(current, u, dt, stamp)
        else:
            sp = TrajectorySetpoint(p=self._assist_target.copy(), v=np.zeros(3),
                                    psi=self._assist_psi, stamp=stamp)
        self.last_setpoint = sp
        return sp

    def assist_nudge(self, current: DroneState, nudge) -> None:
        """Enter position-assist mode and displace the hold point by the nudge."""
        base = self._assist_target if self.mode == POSITION_ASSIST else current.p
        target = np.asarray(base, dtype=float) + np.asarray(nudge, dtype=float)
        if target[2] <= MIN_ASSIST_Z:
            raise ValueError(f"assist nudge would command z <= {MIN_ASSIST_Z} m")
        self.mode = POSITION_ASSIST
        self._assist_target = target
        self._assist_psi = current.psi

    def resume_offboard(self) -> None:
        self.mode = OFFBOARD
        self._assist_target = None

    def plant(self, state: DroneState, sp: TrajectorySetpoint, dt: float) -> DroneState:
        return plant_step(state, sp, dt, self.plant_tau, self.v_max, self.psi_rate_max)
