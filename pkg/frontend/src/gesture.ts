// Press/release pairs become click or bounding-box queries.  The threshold
// is measured in canvas pixels; coordinates are delivered in frame space.

import { ViewScale, canvasToFrame } from "./coords.js";
import { ClientMessage } from "./protocol.js";

export const CLICK_THRESHOLD_PX = 3;

export interface Gesture {
  pressX: number;
  pressY: number;
  releaseX: number;
  releaseY: number;
}

export function classifyGesture(g: Gesture, scale: ViewScale): ClientMessage {
  const dx = g.releaseX - g.pressX;
  const dy = g.releaseY - g.pressY;
  if (Math.hypot(dx, dy) <= CLICK_THRESHOLD_PX) {
    const [x, y] = canvasToFrame(g.pressX, g.pressY, scale);
    return { type: "query_click", x, y };
  }
  const [ax, ay] = canvasToFrame(g.pressX, g.pressY, scale);
  const [bx, by] = canvasToFrame(g.releaseX, g.releaseY, scale);
  return {
    type: "query_bbox",
    x0: Math.min(ax, bx),
    y0: Math.min(ay, by),
    x1: Math.max(ax, bx),
    y1: Math.max(ay, by),
  };
}
