import type { ControlMessage, ErrorReport, GazeUpdate, Layout } from "./protocol.js";
import { parseServerMessage, validateControl } from "./protocol.js";

// Minimal socket shape so tests can drive the client with a fake
// socket; the default factory wraps the browser WebSocket.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

/** ws URL for the tracker service; `?service=ws://...` overrides it. */
export function defaultServiceUrl(loc: { search: string; hostname: string } = location): string {
  const override = new URLSearchParams(loc.search).get("service");
  if (override) return override;
  return `ws://${loc.hostname || "127.0.0.1"}:8765/ws`;
}

export class TrackerClient {
  socket: SocketLike | null = null;

  onOpen: (() => void) | null = null;
  onClose: (() => void) | null = null;
  onLayout: ((layout: Layout) => void) | null = null;
  onGaze: ((update: GazeUpdate) => void) | null = null;
  onFrame: ((jpegB64: string) => void) | null = null;
  onDrops: ((count: number) => void) | null = null;
  onEnd: (() => void) | null = null;
  onCalibStarted: (() => void) | null = null;
  onCalibAborted: (() => void) | null = null;
  onServiceError: ((message: string) => void) | null = null;
  onReport: ((report: ErrorReport) => void) | null = null;

  constructor(
    private makeSocket: (url: string) => SocketLike = (url) =>
      new WebSocket(url) as unknown as SocketLike,
  ) {}

  connect(url: string): void {
    const socket = this.makeSocket(url);
    this.socket = socket;
    socket.onopen = () => this.onOpen?.();
    socket.onclose = () => {
      this.socket = null;
      this.onClose?.();
    };
    socket.onerror = () => {};
    socket.onmessage = (ev) => this.dispatch(String(ev.data));
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  /** Sends one control message, refusing anything that fails the schema. */
  send(msg: ControlMessage): void {
    const problem = validateControl(msg);
    if (problem) throw new Error(`refusing to send invalid control: ${problem}`);
    if (!this.socket) throw new Error("not connected");
    this.socket.send(JSON.stringify(msg));
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
  }

  private dispatch(raw: string): void {
    const msg = parseServerMessage(raw);
    if (!msg) return;
    switch (msg.type) {
      case "layout":
        this.onLayout?.(msg);
        break;
      case "gaze":
        this.onGaze?.(msg);
        break;
      case "frame":
        this.onFrame?.(msg.jpeg_b64);
        break;
      case "drops":
        this.onDrops?.(msg.count);
        break;
      case "end":
        this.onEnd?.();
        break;
      case "calib_started":
        this.onCalibStarted?.();
        break;
      case "calib_aborted":
        this.onCalibAborted?.();
        break;
      case "error":
        this.onServiceError?.(msg.message);
        break;
      case "report":
        this.onReport?.(msg);
        break;
    }
  }
}
