// Session client: one websocket, ordered message handling, ack correlation,
// stale-frame dropping, the level-2 re-detection prompt flow, and reconnect
// with backoff.  The socket is injected so tests can drive a fake.

import {
  AckMessage,
  ClientMessage,
  FrameMessage,
  HelloMessage,
  ServerMessage,
  TelemetryRecord,
  parseServerMessage,
} from "./protocol.js";
import { TelemetryRing } from "./telemetry.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientEvents {
  onFrame?: (frame: FrameMessage) => void;
  onTelemetry?: (rec: TelemetryRecord) => void;
  onHello?: (hello: HelloMessage) => void;
  onAck?: (ack: AckMessage) => void;
  onPrompt?: (active: boolean) => void;
  onConnection?: (state: "connecting" | "open" | "closed") => void;
  onError?: (reason: string) => void;
}

export class SessionClient {
  telemetry = new TelemetryRing(600);
  hello: HelloMessage | null = null;
  lastFrameSeq = -1;
  latestFrame: FrameMessage | null = null;
  promptActive = false;
  redetectLevel: 1 | 2 | 3 = 3;
  connection: "connecting" | "open" | "closed" = "closed";
  droppedStale = 0;

  private socket: SocketLike | null = null;
  private pendingAcks: string[] = [];
  private retryMs = 500;
  private closedByUser = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    readonly url: string,
    private readonly events: ClientEvents = {},
    private readonly socketFactory: SocketFactory = (u) =>
      new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    this.closedByUser = false;
    this.connection = "connecting";
    this.events.onConnection?.("connecting");
    const sock = this.socketFactory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.retryMs = 500;
      this.connection = "open";
      this.events.onConnection?.("open");
    };
    sock.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      const msg = parseServerMessage(text);
      if (msg) this.handle(msg);
    };
    sock.onclose = () => this.handleClose();
    sock.onerror = () => {
      /* close follows; the banner comes from onclose */
    };
  }

  close(): void {
    this.closedByUser = true;
    if (this.retryTimer) clearTimeout(this.retryTimer);
    this.socket?.close();
    this.connection = "closed";
  }

  private handleClose(): void {
    this.connection = "closed";
    this.events.onConnection?.("closed");
    if (this.closedByUser) return;
    const wait = this.retryMs;
    this.retryMs = Math.min(this.retryMs * 2, 8000);
    this.retryTimer = setTimeout(() => this.connect(), wait);
  }

  /** Every outgoing message is one protocol message; acks return in order. */
  send(msg: ClientMessage): void {
    if (!this.socket || this.connection !== "open") {
      this.events.onError?.("not connected");
      return;
    }
    this.pendingAcks.push(msg.type);
    this.socket.send(JSON.stringify(msg));
  }

  handle(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.hello = msg;
        this.events.onHello?.(msg);
        break;
      case "frame":
        if (msg.seq <= this.lastFrameSeq) {
          this.droppedStale++; // out-of-order frame: discard
          return;
        }
        this.lastFrameSeq = msg.seq;
        this.latestFrame = msg;
        this.events.onFrame?.(msg);
        break;
      case "telemetry":
        this.telemetry.push(msg.record);
        this.events.onTelemetry?.(msg.record);
        break;
      case "redetect_request":
        this.promptActive = true;
        this.events.onPrompt?.(true);
        break;
      case "ack": {
        const forType = msg.for ?? this.pendingAcks[0] ?? "unknown";
        const idx = this.pendingAcks.indexOf(forType);
        if (idx >= 0) this.pendingAcks.splice(idx, 1);
        if (!msg.ok && msg.reason) this.events.onError?.(msg.reason);
        if (this.promptActive && msg.ok &&
            (forType === "query_click" || forType === "query_bbox")) {
          this.promptActive = false; // answer accepted: prompt clears
          this.events.onPrompt?.(false);
        }
        if (msg.ok && forType === "set_redetect_level" && this.redetectLevel !== 2
            && this.promptActive) {
          this.promptActive = false; // switched away from level 2 mid-prompt
          this.events.onPrompt?.(false);
        }
        this.events.onAck?.(msg);
        break;
      }
      case "error":
        this.events.onError?.(msg.reason);
        break;
    }
  }

  setRedetectLevel(level: 1 | 2 | 3): void {
    this.redetectLevel = level;
    this.send({ type: "set_redetect_level", level });
  }

  /** User dismissed the prompt: the vehicle keeps hovering, surfaced as a warning. */
  cancelPrompt(): string {
    this.promptActive = false;
    this.events.onPrompt?.(false);
    return "re-detection still waiting for an answer; vehicle is hovering";
  }
}
