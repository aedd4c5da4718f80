// Frame + overlay rendering onto the main canvas.

import { ViewScale, frameToCanvas } from "./coords.js";
import { Overlay } from "./protocol.js";

export const STATUS_COLORS: Record<string, string> = {
  TRACKING: "#2ecc71",
  LOST: "#e74c3c",
  REDETECTING: "#f39c12",
  AWAITING_HUMAN: "#9b59b6",
  IDLE: "#7f8c8d",
};

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  overlay: Overlay,
  scale: ViewScale,
): void {
  const color = STATUS_COLORS[overlay.status] ?? "#7f8c8d";
  if (overlay.bbox) {
    const [x0, y0] = frameToCanvas(overlay.bbox[0], overlay.bbox[1], scale);
    const [x1, y1] = frameToCanvas(overlay.bbox[2], overlay.bbox[3], scale);
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
  }
  if (overlay.outline) {
    ctx.fillStyle = color;
    for (const [fx, fy] of overlay.outline) {
      const [cx, cy] = frameToCanvas(fx, fy, scale);
      ctx.fillRect(cx - 1, cy - 1, 2, 2);
    }
  }
  if (overlay.centroid) {
    const [cx, cy] = frameToCanvas(overlay.centroid[0], overlay.centroid[1], scale);
    ctx.strokeStyle = color;
    ctx.beginPath();
    ctx.moveTo(cx - 6, cy);
    ctx.lineTo(cx + 6, cy);
    ctx.moveTo(cx, cy - 6);
    ctx.lineTo(cx, cy + 6);
    ctx.stroke();
  }
  const label = overlay.similarity === null
    ? overlay.status
    : `${overlay.status}  ${overlay.similarity.toFixed(3)}`;
  ctx.font = "12px monospace";
  ctx.fillStyle = "rgba(0,0,0,0.6)";
  ctx.fillRect(4, 4, ctx.measureText(label).width + 8, 18);
  ctx.fillStyle = color;
  ctx.fillText(label, 8, 17);
}

export function drawDragBox(
  ctx: CanvasRenderingContext2D,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): void {
  ctx.strokeStyle = "#3498db";
  ctx.setLineDash([4, 3]);
  ctx.lineWidth = 1;
  ctx.strokeRect(Math.min(x0, x1), Math.min(y0, y1), Math.abs(x1 - x0), Math.abs(y1 - y0));
  ctx.setLineDash([]);
}
