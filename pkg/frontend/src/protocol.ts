// Message shapes spoken with the session server (JSON over one websocket).

export interface Overlay {
  status: string;
  similarity: number | null;
  centroid: [number, number] | null;
  bbox: [number, number, number, number] | null;
  outline: [number, number][] | null;
}

export interface FrameMessage {
  type: "frame";
  seq: number;
  t: number;
  w: number;
  h: number;
  encoding: "png" | "jpeg";
  data: string; // base64
  overlay: Overlay;
}

export interface TelemetryRecord {
  t: number;
  seq: number;
  drone: { p: [number, number, number]; psi: number };
  target: [number, number] | null;
  target_px: [number, number] | null;
  status: string;
  centroid: [number, number] | null;
  similarity: number | null;
  events: { kind: string }[];
}

export interface TelemetryMessage {
  type: "telemetry";
  record: TelemetryRecord;
}

export interface HelloMessage {
  type: "hello";
  w: number;
  h: number;
  dt: number;
  scenario: string;
  speed: number;
}

export interface AckMessage {
  type: "ack";
  for?: string;
  ok: boolean;
  reason?: string;
  seq?: number;
}

export interface RedetectRequestMessage {
  type: "redetect_request";
  seq: number;
}

export type ServerMessage =
  | FrameMessage
  | TelemetryMessage
  | HelloMessage
  | AckMessage
  | RedetectRequestMessage
  | { type: "error"; reason: string };

export type ClientMessage =
  | { type: "query_click"; x: number; y: number }
  | { type: "query_bbox"; x0: number; y0: number; x1: number; y1: number }
  | { type: "query_template"; class_id: number }
  | { type: "set_redetect_level"; level: 1 | 2 | 3 }
  | { type: "assist"; dx: number; dy: number; dz: number }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "reset" };

export function parseServerMessage(raw: string): ServerMessage | null {
  try {
    const msg = JSON.parse(raw);
    if (msg && typeof msg.type === "string") return msg as ServerMessage;
  } catch {
    /* malformed frames are dropped */
  }
  return null;
}
