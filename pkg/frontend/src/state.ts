import type { ErrorReport, GazeUpdate, Layout } from "./protocol.js";
import { TARGET_COUNT } from "./protocol.js";

export type Phase =
  | { kind: "idle" }
  | { kind: "calibrating"; targetIndex: number; dwellRemainingMs: number }
  | { kind: "verifying" }
  | { kind: "report" };

// Exactly one phase at a time by construction: `phase` is a single
// tagged value, never a set of booleans that could disagree.
export class SessionState {
  phase: Phase = { kind: "idle" };
  connected = false;
  banner: string | null = null;
  layout: Layout | null = null;
  lastGaze: GazeUpdate | null = null;
  report: ErrorReport | null = null;

  toIdle(banner: string | null = null): void {
    this.phase = { kind: "idle" };
    this.banner = banner;
  }

  toCalibrating(targetIndex: number, dwellRemainingMs: number): void {
    if (!Number.isInteger(targetIndex) || targetIndex < 1 || targetIndex > TARGET_COUNT) {
      throw new RangeError(`target index must be 1..${TARGET_COUNT}, got ${targetIndex}`);
    }
    this.phase = { kind: "calibrating", targetIndex, dwellRemainingMs };
    this.banner = null;
  }

  toVerifying(): void {
    this.phase = { kind: "verifying" };
  }

  toReport(report: ErrorReport | null = null): void {
    this.phase = { kind: "report" };
    if (report) this.report = report;
  }
}
