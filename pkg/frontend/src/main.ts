// DOM wiring: live view, gesture capture, prompt banner, level selector,
// assist nudges, and the drone-vs-target track plot.

import { SessionClient } from "./client.js";
import { clampToFrame, viewScale } from "./coords.js";
import { classifyGesture } from "./gesture.js";
import { drawDragBox, drawOverlay, STATUS_COLORS } from "./overlay.js";
import { FrameMessage } from "./protocol.js";
import { plotTransform, trackPaths } from "./telemetry.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const view = $("view") as unknown as HTMLCanvasElement;
const plot = $("plot") as unknown as HTMLCanvasElement;
const banner = $("banner");
const prompt = $("prompt");
const statusBadge = $("status");
const info = $("info");

const viewCtx = view.getContext("2d")!;
const plotCtx = plot.getContext("2d")!;

const DISPLAY_SCALE = 2; // canvas pixels per frame pixel

let frameW = 0;
let frameH = 0;
let drag: { x: number; y: number } | null = null;
let dragNow: { x: number; y: number } | null = null;
let pendingImage: HTMLImageElement | null = null;

const url = `ws://${location.host}/live`;
const client = new SessionClient(url, {
  onHello(h) {
    frameW = h.w;
    frameH = h.h;
    view.width = h.w * DISPLAY_SCALE;
    view.height = h.h * DISPLAY_SCALE;
    info.textContent = `${h.scenario}  ${h.w}x${h.h} @ ${(1 / h.dt).toFixed(0)} Hz`;
  },
  onFrame(frame) {
    renderFrame(frame);
  },
  onTelemetry(rec) {
    statusBadge.textContent = rec.status;
    statusBadge.style.background = STATUS_COLORS[rec.status] ?? "#7f8c8d";
    renderPlot();
  },
  onPrompt(active) {
    prompt.classList.toggle("hidden", !active);
  },
  onConnection(state) {
    banner.textContent = state === "open" ? "" : `connection: ${state}`;
    banner.classList.toggle("hidden", state === "open");
  },
  onError(reason) {
    banner.textContent = reason;
    banner.classList.remove("hidden");
    setTimeout(() => banner.classList.add("hidden"), 2500);
  },
});

function renderFrame(frame: FrameMessage): void {
  // one repaint per frame message: decode, then draw image + overlay
  const img = new Image();
  pendingImage = img;
  img.onload = () => {
    if (pendingImage !== img) return; // a newer frame superseded this one
    viewCtx.imageSmoothingEnabled = false;
    viewCtx.drawImage(img, 0, 0, view.width, view.height);
    const s = viewScale(view.width, view.height, frame.w, frame.h);
    drawOverlay(viewCtx, frame.overlay, s);
    if (drag && dragNow) drawDragBox(viewCtx, drag.x, drag.y, dragNow.x, dragNow.y);
  };
  img.src = `data:image/${frame.encoding};base64,${frame.data}`;
}

function renderPlot(): void {
  const paths = trackPaths(client.telemetry.toArray());
  const tf = plotTransform(paths, plot.width, plot.height);
  plotCtx.fillStyle = "#111";
  plotCtx.fillRect(0, 0, plot.width, plot.height);
  const draw = (pts: [number, number][], color: string) => {
    if (pts.length < 2) return;
    plotCtx.strokeStyle = color;
    plotCtx.lineWidth = 1.5;
    plotCtx.beginPath();
    pts.forEach((p, i) => {
      const [x, y] = tf(p);
      if (i === 0) plotCtx.moveTo(x, y);
      else plotCtx.lineTo(x, y);
    });
    plotCtx.stroke();
  };
  draw(paths.target, "#e67e22");
  draw(paths.drone, "#3498db");
}

function canvasPos(ev: PointerEvent): { x: number; y: number } {
  const rect = view.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * view.width,
    y: ((ev.clientY - rect.top) / rect.height) * view.height,
  };
}

view.addEventListener("pointerdown", (ev) => {
  drag = canvasPos(ev);
  dragNow = drag;
  view.setPointerCapture(ev.pointerId);
});
view.addEventListener("pointermove", (ev) => {
  if (drag) dragNow = canvasPos(ev);
});
view.addEventListener("pointerup", (ev) => {
  if (!drag || frameW === 0) return;
  const up = canvasPos(ev);
  const s = viewScale(view.width, view.height, frameW, frameH);
  const msg = classifyGesture(
    { pressX: drag.x, pressY: drag.y, releaseX: up.x, releaseY: up.y }, s);
  if (msg.type === "query_click") {
    [msg.x, msg.y] = clampToFrame(msg.x, msg.y, frameW - 1, frameH - 1);
  }
  client.send(msg);
  drag = dragNow = null;
});

$("cancel-prompt").addEventListener("click", () => {
  const warning = client.cancelPrompt();
  banner.textContent = warning;
  banner.classList.remove("hidden");
});

for (const level of [1, 2, 3] as const) {
  $(`level-${level}`).addEventListener("click", () => {
    client.setRedetectLevel(level);
    document.querySelectorAll(".level-btn").forEach((b) =>
      b.classList.toggle("active", b.id === `level-${level}`));
  });
}

const NUDGE = 0.3;
const nudges: Record<string, [number, number, number]> = {
  "nudge-fwd": [NUDGE, 0, 0],
  "nudge-back": [-NUDGE, 0, 0],
  "nudge-left": [0, NUDGE, 0],
  "nudge-right": [0, -NUDGE, 0],
};
for (const [id, [dx, dy, dz]] of Object.entries(nudges)) {
  $(id).addEventListener("click", () => client.send({ type: "assist", dx, dy, dz }));
}

$("pause").addEventListener("click", () => client.send({ type: "pause" }));
$("resume").addEventListener("click", () => client.send({ type: "resume" }));
$("reset").addEventListener("click", () => client.send({ type: "reset" }));
$("template").addEventListener("click", () => {
  const cls = parseInt(($("class-id") as HTMLInputElement).value || "1", 10);
  client.send({ type: "query_template", class_id: cls });
});

client.connect();
