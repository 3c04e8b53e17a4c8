// Wire protocol for the tracker service WebSocket (ws://host:port/ws).
//
// The service pushes a `layout` message as soon as a client connects,
// then broadcasts gaze/frame/drops/end while streaming. The UI sends
// exactly four control message shapes and the service answers with the
// replies modelled below. The UI never computes calibration numbers
// itself -- everything it renders is an echo of these messages.

export interface TargetSpec {
  index: number; // 1..20
  row: number; // 1..4
  col: number; // 1..5
  cx: number; // square centre, screen px
  cy: number;
  side: number; // square edge length, px
  color: [number, number, number]; // RGB, 0..255
  dwell: number; // seconds the subject fixates this target
}

export interface Layout {
  resolution: [number, number];
  targets: TargetSpec[];
}

export interface GazeUpdate {
  t: number;
  px: number | null;
  py: number | null;
  conf: number;
  sx: number | null;
  sy: number | null;
  seq: number;
}

export interface ErrorReport {
  session: string;
  samples: number;
  model: string | null;
  cells: number[][] | null;
  mean_deg: number | null;
  error?: string;
}

export type ControlMessage =
  | { type: "calib_start" }
  | { type: "target"; index: number }
  | { type: "calib_abort" }
  | { type: "calib_end" };

export type ServerMessage =
  | ({ type: "layout" } & Layout)
  | ({ type: "gaze" } & GazeUpdate)
  | { type: "frame"; jpeg_b64: string }
  | { type: "drops"; count: number }
  | { type: "end" }
  | { type: "calib_started" }
  | { type: "calib_aborted" }
  | { type: "error"; message: string }
  | ({ type: "report" } & ErrorReport);

export const TARGET_COUNT = 20;

// Outbound schema kept as data so the validator and the docs cannot drift.
const CONTROL_FIELDS: Record<string, Record<string, string>> = {
  calib_start: {},
  target: { index: "number" },
  calib_abort: {},
  calib_end: {},
};

/** Returns null when `msg` is a valid control message, else the reason. */
export function validateControl(msg: any): string | null {
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    return "control message must be a JSON object";
  }
  const fields = CONTROL_FIELDS[msg.type as string];
  if (fields === undefined) {
    return `unknown control type ${JSON.stringify(msg.type)}`;
  }
  for (const [name, kind] of Object.entries(fields)) {
    if (typeof msg[name] !== kind) return `field '${name}' must be a ${kind}`;
  }
  for (const name of Object.keys(msg)) {
    if (name !== "type" && !(name in fields)) return `unexpected field '${name}'`;
  }
  if (msg.type === "target") {
    const index = msg.index;
    if (!Number.isInteger(index) || index < 1 || index > TARGET_COUNT) {
      return `target index must be 1..${TARGET_COUNT}`;
    }
  }
  return null;
}

/** Parses one service frame; returns null for anything the UI does not know. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let data: any;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  const known = [
    "layout", "gaze", "frame", "drops", "end",
    "calib_started", "calib_aborted", "error", "report",
  ];
  if (typeof data !== "object" || data === null || !known.includes(data.type)) {
    return null;
  }
  return data as ServerMessage;
}
