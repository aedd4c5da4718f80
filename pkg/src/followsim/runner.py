"""Per-tick pipeline orchestration, scripted events, and JSONL run logging.

Tick order is strict: events -> render -> segment -> track -> servo ->
offboard -> plant/world step.  Nothing computed at tick k touches the plant
before tick k's perception is complete, and identical (scenario, seed) pairs
produce byte-identical logs.
"""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path

import numpy as np

from . import __version__
from .offboard import OffboardController
from .perception import DescriptorModel, Query, QueryError, segment
from .scenario import Scenario, derive_seed, load_scenario
from .servo import ServoController
from .tracking import AWAITING_HUMAN, IDLE, TRACKING, Tracker


class RunAborted(RuntimeError):
    def __init__(self, message: str, log: "RunLog"):
        super().__init__(message)
        self.log = log


class RunLog:
    def __init__(self, header: dict):
        self.header = header
        self.records: list[dict] = []

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header, separators=(",", ":"))]
        lines += [json.dumps(r, separators=(",", ":")) for r in self.records]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    def statuses(self) -> list[str]:
        return [r["status"] for r in self.records]

    def summary(self) -> dict:
        statuses = self.statuses()
        return {
            "ticks": len(self.records),
            "tracked_ticks": sum(s == TRACKING for s in statuses),
            "losses": sum(1 for e in self.events() if e["kind"] == "lost"),
            "reacquisitions": [e["instance_id"] for e in self.events()
                               if e["kind"] == "reacquired"],
            "final_status": statuses[-1] if statuses else None,
        }

    def events(self) -> list[dict]:
        return [e for r in self.records for e in r["events"]]


def _human_query_from_payload(payload: dict, frame, masks, target_instance: int) -> Query:
    """Scripted human answers: explicit geometry, or a surrogate click on the
    named (default: target) object's visible region."""
    if "query" in payload:
        cfg = payload["query"]
        if cfg["kind"] == "click":
            return Query.click(cfg["x"], cfg["y"])
        if cfg["kind"] == "bbox":
            return Query.bbox(cfg["x0"], cfg["y0"], cfg["x1"], cfg["y1"])
        raise QueryError("human answer must be a click or a bbox")
    instance = int(payload.get("instance_id", target_instance))
    candidates = [m for m in masks if m.instance_id == instance]
    if not candidates:
        raise QueryError(f"scripted human answer: object {instance} not visible")
    mask = max(candidates, key=lambda m: m.pixel_count)
    x, y = _representative_pixel(mask)
    return Query.click(x, y)


def _representative_pixel(mask) -> tuple[int, int]:
    """A pixel guaranteed to lie inside the mask, nearest its centroid."""
    w = mask.shape[1]
    ys, xs = np.divmod(mask.pixels, w)
    cx, cy = mask.centroid
    k = int(np.argmin((xs + 0.5 - cx) ** 2 + (ys + 0.5 - cy) ** 2))
    return int(xs[k]), int(ys[k])


class Pipeline:
    """One simulation session; step_once() drives a single tick.

    human_timeout=False (serve mode) disables the headless stall abort while
    a level-2 re-detection waits for a live client answer.
    """

    def __init__(self, scenario: Scenario, human_timeout: bool = True):
        self.sc = scenario
        self.human_timeout = human_timeout
        self.world = scenario.build_world()
        self.model = DescriptorModel(
            scenario.class_ids(),
            dim=int(scenario.descriptor_cfg["dim"]),
            sigma=float(scenario.descriptor_cfg["sigma"]),
            seed=int(scenario.descriptor_cfg["seed"]),
            similar=scenario.descriptor_cfg.get("similar"),
        )
        self.tracker = Tracker(scenario.tracker, redetect_level=scenario.redetect_level)
        self.servo = ServoController(
            scenario.camera, scenario.gains,
            b=scenario.servo_cfg["b"], a=scenario.servo_cfg["a"],
            dead_zone_px=scenario.servo_cfg["dead_zone_px"],
            area_reference=scenario.servo_cfg["area_reference"],
        )
        d = scenario.drone_init
        self.offboard = OffboardController(
            plant_tau=float(d.get("plant_tau", 0.3)),
            v_max=float(d.get("v_max", 2.0)),
            psi_rate_max=float(d.get("psi_rate_max", np.pi)),
        )
        self.tick = 0
        self.query_pending = scenario.query is not None
        self.last_frame = None
        self._events = deque(scenario.events)
        self._human_payloads: deque = deque()
        self._client_inbox: deque = deque()
        self._client_results: list[tuple[str, bool, str | None]] = []
        self._await_since: float | None = None
        self._overseg_rng = np.random.Generator(
            np.random.PCG64(derive_seed(scenario.seed, "oversegment")))
        self.log = RunLog({
            "type": "header",
            "name": scenario.name,
            "scenario_hash": scenario.hash(),
            "seed": scenario.seed,
            "dt": scenario.dt,
            "duration": scenario.duration,
            "ticks": scenario.ticks,
            "target_instance": scenario.target_instance,
            "version": __version__,
        })

    # -- events ---------------------------------------------------------------

    def _apply_due_events(self, t: float, tick_events: list[dict]) -> None:
        while self._events and self._events[0].t <= t + 1e-9:
            ev = self._events.popleft()
            tick_events.append({"kind": f"event:{ev.kind}", **ev.payload})
            if ev.kind == "occlude_start":
                obj = self.world.object_by_id(int(ev.payload["instance_id"]))
                obj.active_from = t
            elif ev.kind == "assist_nudge":
                nudge = (ev.payload.get("dx", 0.0), ev.payload.get("dy", 0.0),
                         ev.payload.get("dz", 0.0))
                self.offboard.assist_nudge(self.world.drone, nudge)
            elif ev.kind == "assist_resume":
                self.offboard.resume_offboard()
            elif ev.kind == "set_redetect_level":
                self.tracker.set_redetect_level(int(ev.payload["level"]))
            elif ev.kind == "human_answer":
                self._human_payloads.append(ev.payload)

    def _scripted_answers_remaining(self) -> bool:
        return bool(self._human_payloads) or any(
            ev.kind == "human_answer" for ev in self._events)

    # -- live client queries ----------------------------------------------------

    def queue_client_query(self, msg_type: str, query: Query) -> None:
        """Queue a client query; it is applied inside the next tick, against
        that tick's frame, and acknowledged via drain_client_results()."""
        self._client_inbox.append((msg_type, query))

    def drain_client_results(self) -> list[dict]:
        out, self._client_results = self._client_results, []
        return out

    def _client_result(self, msg_type: str, ok: bool, reason: str | None = None) -> None:
        self._client_results.append({"for": msg_type, "ok": ok, "reason": reason,
                                     "seq": self.tick})

    def _apply_client_queries(self, frame, masks) -> bool:
        """Apply queued client queries against this frame; True when the
        tracker consumed the frame (acquired or answered)."""
        processed = False
        while self._client_inbox:
            msg_type, query = self._client_inbox.popleft()
            tracker = self.tracker
            try:
                if tracker.state.status == AWAITING_HUMAN:
                    if query.kind == "template":
                        raise QueryError("a re-detection request needs a click or a bbox")
                    tracker.process(frame, masks, human_answer=query)
                    processed = True
                    self._client_result(msg_type, True)
                else:
                    if tracker.start_from_query(frame, masks, query, self.model):
                        self.query_pending = False
                        processed = True
                        self._client_result(msg_type, True)
                    else:
                        self._client_result(msg_type, False,
                                            "no region matches the template")
            except QueryError as exc:
                self._client_result(msg_type, False, str(exc))
        return processed

    # -- one tick -------------------------------------------------------------

    def step_once(self) -> dict:
        sc, world = self.sc, self.world
        t = world.t
        tick_events: list[dict] = []
        self._apply_due_events(t, tick_events)

        frame = world.render_frame(self.model, seq=self.tick)
        self.last_frame = frame
        masks = segment(frame, oversegment=sc.oversegment["enabled"],
                        p_split=sc.oversegment["p_split"], rng=self._overseg_rng)

        # --- tracking stage
        tracker = self.tracker
        processed = self._apply_client_queries(frame, masks) if self._client_inbox else False
        if processed:
            pass
        elif self.query_pending and self.tick >= sc.query_tick:
            try:
                if tracker.start_from_query(frame, masks, sc.query, self.model):
                    self.query_pending = False
                elif sc.query.kind in ("click", "bbox"):
                    self.query_pending = False
            except QueryError as exc:
                self._abort(f"initial query failed: {exc}", tick_events, frame, masks)
        elif tracker.state.status != IDLE:
            answer = None
            if tracker.state.status == AWAITING_HUMAN and self._human_payloads:
                payload = self._human_payloads.popleft()
                try:
                    answer = _human_query_from_payload(payload, frame, masks,
                                                       sc.target_instance)
                except QueryError as exc:
                    self._abort(f"scripted human answer failed: {exc}",
                                tick_events, frame, masks)
            try:
                tracker.process(frame, masks, human_answer=answer)
            except QueryError as exc:
                self._abort(f"human answer rejected: {exc}", tick_events, frame, masks)
        tick_events.extend(tracker.drain_events())

        status = tracker.state.status
        if status == AWAITING_HUMAN and self.human_timeout:
            if self._await_since is None:
                self._await_since = t
            elif (t - self._await_since > sc.assist_timeout
                  and not self._scripted_answers_remaining()):
                tick_events.append({"kind": "timeout_abort"})
                self._record(t, frame, masks, status, None, tick_events, None, None)
                raise RunAborted(
                    f"re-detection waited {sc.assist_timeout}s for a human answer",
                    self.log)
        else:
            self._await_since = None

        # --- servo stage
        mask = tracker.state.current_mask
        centroid = mask.centroid if (status == TRACKING and mask) else None
        area = mask.pixel_count if (status == TRACKING and mask) else None
        control = self.servo.step(status, centroid, area)

        # --- offboard + plant stage
        setpoint = self.offboard.tick(world.drone, control, sc.dt, stamp=t)
        record = self._record(t, frame, masks, status, centroid, tick_events,
                              control, setpoint)
        world.step(sc.dt, plant=self.offboard.plant, setpoint=setpoint)
        self.tick += 1
        return record

    def _abort(self, message: str, tick_events: list[dict], frame, masks) -> None:
        tick_events.append({"kind": "abort", "reason": message})
        self._record(self.world.t, frame, masks, self.tracker.state.status,
                     None, tick_events, None, None)
        raise RunAborted(message, self.log)

    # -- logging ----------------------------------------------------------------

    def _target_truth(self, t: float, masks) -> tuple[list | None, list | None]:
        sc = self.sc
        try:
            obj = self.world.object_by_id(sc.target_instance)
        except KeyError:
            return None, None
        if not obj.is_active(t):
            return None, None
        gx, gy = obj.position_at(t)
        visible = [m for m in masks if m.instance_id == sc.target_instance]
        px = None
        if visible:
            x, y = _representative_pixel(max(visible, key=lambda m: m.pixel_count))
            px = [x, y]
        return [gx, gy], px

    def _record(self, t, frame, masks, status, centroid, tick_events,
                control, setpoint) -> dict:
        drone = self.world.drone
        target, target_px = self._target_truth(t, masks)
        sim = self.tracker.state.last_similarity
        record = {
            "t": t,
            "seq": self.tick,
            "drone": {"p": list(drone.p), "psi": drone.psi,
                      "v": list(drone.v), "psi_dot": drone.psi_dot},
            "target": target,
            "target_px": target_px,
            "status": status,
            "centroid": list(centroid) if centroid else None,
            "similarity": sim if status == TRACKING else None,
            "u": None if control is None else {
                "vx": control.vx, "vy": control.vy, "vz": control.vz,
                "yaw_rate": control.yaw_rate, "reset": control.reset},
            "setpoint": None if setpoint is None else {
                "p": list(setpoint.p), "psi": setpoint.psi},
            "heartbeats": self.offboard.heartbeat_count,
            "mode": self.offboard.mode,
            "events": tick_events,
        }
        self.log.records.append(record)
        return record


def run_headless(scenario, seed_override: int | None = None) -> RunLog:
    """Execute the full loop as fast as possible and return the complete log."""
    if isinstance(scenario, Scenario):
        sc = load_scenario(scenario.raw, seed_override) if seed_override is not None else scenario
    else:
        sc = load_scenario(scenario, seed_override)
    pipe = Pipeline(sc)
    for _ in range(sc.ticks):
        pipe.step_once()
    return pipe.log
