// Fixed-capacity telemetry history feeding the status readout and the
// drone-vs-target track plot.

import { TelemetryRecord } from "./protocol.js";

export class TelemetryRing {
  private buf: (TelemetryRecord | undefined)[];
  private head = 0;
  private count = 0;

  constructor(readonly capacity = 600) {
    this.buf = new Array(capacity);
  }

  push(rec: TelemetryRecord): void {
    this.buf[this.head] = rec;
    this.head = (this.head + 1) % this.capacity;
    if (this.count < this.capacity) this.count++;
  }

  get size(): number {
    return this.count;
  }

  latest(): TelemetryRecord | undefined {
    if (this.count === 0) return undefined;
    return this.buf[(this.head - 1 + this.capacity) % this.capacity];
  }

  /** Oldest-to-newest snapshot. */
  toArray(): TelemetryRecord[] {
    const out: TelemetryRecord[] = [];
    for (let k = 0; k < this.count; k++) {
      const idx = (this.head - this.count + k + this.capacity) % this.capacity;
      const rec = this.buf[idx];
      if (rec) out.push(rec);
    }
    return out;
  }
}

export interface TrackPaths {
  drone: [number, number][];
  target: [number, number][];
}

export function trackPaths(records: TelemetryRecord[]): TrackPaths {
  const drone: [number, number][] = [];
  const target: [number, number][] = [];
  for (const r of records) {
    drone.push([r.drone.p[0], r.drone.p[1]]);
    if (r.target) target.push([r.target[0], r.target[1]]);
  }
  return { drone, target };
}

/** World-to-plot transform fitting both tracks with a margin. */
export function plotTransform(paths: TrackPaths, w: number, h: number, margin = 10) {
  const pts = paths.drone.concat(paths.target);
  if (pts.length === 0) return (p: [number, number]): [number, number] => [w / 2, h / 2];
  let [minX, minY] = pts[0]!;
  let [maxX, maxY] = pts[0]!;
  for (const [x, y] of pts) {
    minX = Math.min(minX, x);
    maxX = Math.max(maxX, x);
    minY = Math.min(minY, y);
    maxY = Math.max(maxY, y);
  }
  const span = Math.max(maxX - minX, maxY - minY, 1e-6);
  const s = (Math.min(w, h) - 2 * margin) / span;
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  // world +x up on the plot, +y left: matches the camera's map view
  return (p: [number, number]): [number, number] => [
    w / 2 - (p[1] - cy) * s,
    h / 2 - (p[0] - cx) * s,
  ];
}
