"""Interactive session server: steps the simulation in a background thread,
streams frames (base64 PNG/JPEG) and telemetry over a single bidirectional
JSON message socket, and applies client queries at tick boundaries.

Concurrency: the sim loop owns all mutable state; the websocket side talks
to it exclusively through an inbound command queue and an outbound message
queue.  Frames are dropped under backpressure, telemetry never is.
"""

from __future__ import annotations

import asyncio
import base64
import io
import threading
import time
from collections import deque
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .perception import Query, QueryError
from .runner import Pipeline
from .scenario import Scenario, load_scenario
from .tracking import TRACKING

DEFAULT_PORT = 1234
ALIAS_PORT = 5555


def encode_frame(frame, encoding: str = "png", scale: int | None = None) -> str:
    """Encode the grayscale render as base64 (standard alphabet, padded)."""
    if encoding not in ("png", "jpeg"):
        raise ValueError("encoding must be png or jpeg")
    img = Image.fromarray(frame.render, mode="L")
    if scale and scale > 0 and scale != frame.width:
        img = img.resize((scale, scale * frame.height // frame.width), Image.NEAREST)
    buf = io.BytesIO()
    if encoding == "png":
        img.save(buf, format="PNG", compress_level=1)
    else:
        img.save(buf, format="JPEG", quality=85)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_frame(data: str) -> np.ndarray:
    """Inverse of encode_frame (exact for png)."""
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(data))))


def mask_outline(mask, max_points: int = 400) -> list[list[int]]:
    """Boundary pixels of a mask (subsampled), for the client overlay."""
    from scipy import ndimage

    arr = mask.to_array()
    inner = ndimage.binary_erosion(arr, np.ones((3, 3), dtype=bool))
    ys, xs = np.nonzero(arr & ~inner)
    step = max(1, len(xs) // max_points)
    return [[int(x), int(y)] for x, y in zip(xs[::step], ys[::step])]


class Outbox:
    """Outbound message queue with frame-only backpressure dropping."""

    def __init__(self, max_frames: int = 16):
        self.max_frames = max_frames
        self._q: deque = deque()
        self._cond = threading.Condition()
        self.dropped_frames = 0

    def put(self, message: dict, droppable: bool = False) -> None:
        with self._cond:
            if droppable:
                frames = [m for m, d in self._q if d]
                if len(frames) >= self.max_frames:
                    for i, (_, d) in enumerate(self._q):
                        if d:
                            del self._q[i]
                            self.dropped_frames += 1
                            break
            self._q.append((message, droppable))
            self._cond.notify_all()

    def get(self, timeout: float = 0.5) -> dict | None:
        with self._cond:
            if not self._q:
                self._cond.wait(timeout)
            if not self._q:
                return None
            return self._q.popleft()[0]


class SessionServer:
    """One live scenario session driven by a background stepping thread."""

    def __init__(self, scenario, speed: float = 1.0, encoding: str = "png",
                 stream_scale: int | None = None, max_pending_frames: int = 16):
        sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
        self.scenario = sc
        self.pipeline = Pipeline(sc, human_timeout=False)
        self.speed = speed
        self.encoding = encoding
        self.stream_scale = stream_scale
        self.outbox = Outbox(max_pending_frames)
        self.commands: deque = deque()
        self._cmd_lock = threading.Lock()
        self._paused = False
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._client_attached = False

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5)

    def send_command(self, message: dict) -> None:
        with self._cmd_lock:
            self.commands.append(message)

    # -- sim loop -------------------------------------------------------------

    def _loop(self) -> None:
        tick_wall = None
        while not self._stop.is_set():
            self._drain_commands()
            if self._paused:
                time.sleep(0.005)
                tick_wall = None
                continue
            if self.pipeline.tick >= self.scenario.ticks:
                time.sleep(0.02)
                continue
            if self.speed > 0:
                period = self.scenario.dt / self.speed
                now = time.monotonic()
                if tick_wall is None:
                    tick_wall = now
                sleep_for = tick_wall - now
                if sleep_for > 0:
                    time.sleep(sleep_for)
                tick_wall += period
            self._step_once()

    def _drain_commands(self) -> None:
        while True:
            with self._cmd_lock:
                if not self.commands:
                    return
                msg = self.commands.popleft()
            self._handle_command(msg)

    def _ack(self, msg_type: str, ok: bool, reason: str | None = None,
             seq: int | None = None) -> None:
        ack = {"type": "ack", "for": msg_type, "ok": ok}
        if reason:
            ack["reason"] = reason
        if seq is not None:
            ack["seq"] = seq
        self.outbox.put(ack)

    def _handle_command(self, msg: dict) -> None:
        mtype = msg.get("type")
        try:
            if mtype == "pause":
                self._paused = True
                self._ack(mtype, True)
            elif mtype == "resume":
                self._paused = False
                self.pipeline.offboard.resume_offboard()
                self._ack(mtype, True)
            elif mtype == "reset":
                self.pipeline = Pipeline(self.scenario, human_timeout=False)
                self._ack(mtype, True)
            elif mtype == "set_redetect_level":
                self.pipeline.tracker.set_redetect_level(int(msg["level"]))
                self._ack(mtype, True)
            elif mtype == "assist":
                nudge = (float(msg.get("dx", 0.0)), float(msg.get("dy", 0.0)),
                         float(msg.get("dz", 0.0)))
                self.pipeline.offboard.assist_nudge(self.pipeline.world.drone, nudge)
                self._ack(mtype, True)
            elif mtype in ("query_click", "query_bbox", "query_template"):
                # Applied inside the next tick, against that tick's frame.
                self.pipeline.queue_client_query(mtype, _query_from_message(msg))
            elif mtype is None:
                self._ack("unknown", False, "missing message type")
            else:
                self._ack(mtype, False, f"unknown message type {mtype!r}")
        except (QueryError, ValueError, KeyError, TypeError) as exc:
            self._ack(mtype or "unknown", False, str(exc))

    def _step_once(self) -> None:
        record = self.pipeline.step_once()
        for res in self.pipeline.drain_client_results():
            self._ack(res["for"], res["ok"], res["reason"], seq=res["seq"])
        for ev in record["events"]:
            if ev["kind"] == "redetect_request":
                self.outbox.put({"type": "redetect_request", "seq": record["seq"]})
        self.outbox.put({"type": "telemetry", "record": record})
        self.outbox.put(self._frame_message(record), droppable=True)

    def _frame_message(self, record: dict) -> dict:
        frame = self.pipeline.last_frame
        st = self.pipeline.tracker.state
        overlay = {
            "status": st.status,
            "similarity": record["similarity"],
            "centroid": record["centroid"],
            "bbox": None,
            "outline": None,
        }
        if st.status in (TRACKING,) and st.current_mask is not None:
            x0, y0, x1, y1 = st.current_mask.bbox
            overlay["bbox"] = [int(x0), int(y0), int(x1) + 1, int(y1) + 1]
            overlay["outline"] = mask_outline(st.current_mask)
        return {
            "type": "frame",
            "seq": record["seq"],
            "t": record["t"],
            "w": frame.width,
            "h": frame.height,
            "encoding": self.encoding,
            "data": encode_frame(frame, self.encoding, self.stream_scale),
            "overlay": overlay,
        }


def _query_from_message(msg: dict) -> Query:
    t = msg["type"]
    if t == "query_click":
        return Query.click(float(msg["x"]), float(msg["y"]))
    if t == "query_bbox":
        return Query.bbox(float(msg["x0"]), float(msg["y0"]),
                          float(msg["x1"]), float(msg["y1"]))
    return Query.template(int(msg["class_id"]))


def make_app(session: SessionServer, ui_dir: str | None = None):
    """FastAPI app exposing the session websocket and the optional static UI."""
    app = FastAPI(title="followsim session")

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "tick": session.pipeline.tick}

    @app.websocket("/live")
    async def live(ws: WebSocket):
        await ws.accept()
        if session._client_attached:
            await ws.send_json({"type": "error", "reason": "session busy"})
            await ws.close()
            return
        session._client_attached = True
        sc = session.scenario
        await ws.send_json({"type": "hello", "w": sc.camera.width, "h": sc.camera.height,
                            "dt": sc.dt, "scenario": sc.name, "speed": session.speed})

        async def sender():
            while True:
                msg = await asyncio.to_thread(session.outbox.get, 0.25)
                if msg is not None:
                    await ws.send_json(msg)

        task = asyncio.ensure_future(sender())
        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except ValueError:
                    session.outbox.put({"type": "ack", "ok": False,
                                        "reason": "malformed JSON message"})
                    continue
                if not isinstance(msg, dict):
                    session.outbox.put({"type": "ack", "ok": False,
                                        "reason": "message must be an object"})
                    continue
                session.send_command(msg)
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()
            session._client_attached = False

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def serve(scenario, port: int = DEFAULT_PORT, speed: float = 1.0,
          ui_dir: str | None = None, encoding: str = "png",
          stream_scale: int | None = None) -> None:
    """Run the session server until interrupted (CLI entry)."""
    import uvicorn

    session = SessionServer(scenario, speed=speed, encoding=encoding,
                            stream_scale=stream_scale)
    session.start()
    try:
        uvicorn.run(make_app(session, ui_dir), host="127.0.0.1", port=port,
                    log_level="warning")
    finally:
        session.stop()
