// Canvas <-> frame pixel mapping.  The canvas is the frame scaled by an
// integer-or-fractional display factor; the mapping must be bijective so a
// drawn box lands on exactly the pixels the user pointed at.

export interface ViewScale {
  scaleX: number;
  scaleY: number;
}

export function viewScale(canvasW: number, canvasH: number, frameW: number, frameH: number): ViewScale {
  if (frameW <= 0 || frameH <= 0) throw new Error("frame dimensions must be positive");
  return { scaleX: canvasW / frameW, scaleY: canvasH / frameH };
}

export function canvasToFrame(x: number, y: number, s: ViewScale): [number, number] {
  return [x / s.scaleX, y / s.scaleY];
}

export function frameToCanvas(x: number, y: number, s: ViewScale): [number, number] {
  return [x * s.scaleX, y * s.scaleY];
}

/** Clamp a frame-space point into the frame bounds. */
export function clampToFrame(x: number, y: number, w: number, h: number): [number, number] {
  return [Math.min(Math.max(x, 0), w), Math.min(Math.max(y, 0), h)];
}
