import type { ControlMessage, Layout, TargetSpec } from "./protocol.js";
import { validateControl } from "./protocol.js";
import type { SessionState } from "./state.js";

export interface Transport {
  send(msg: ControlMessage): void;
}

export interface SequenceHooks {
  showTarget?: (target: TargetSpec) => void;
  onFinished?: () => void; // calib_end sent; the report view owns the screen
  onAborted?: () => void;
  onConnectionLost?: () => void;
}

// Drives the fixation protocol: the 20 squares are shown one after
// another, a `target` control goes out at each transition, and a single
// `calib_end` follows the last square's dwell. Timers are the only
// concurrency; every outbound message passes the schema validator.
export class CalibrationSequence {
  running = false;
  paused = false;

  private targets: TargetSpec[] = [];
  private position = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private dwellOverrideMs: number | null = null;
  private remainingMs = 0;
  private shownAt = 0;

  constructor(
    private transport: Transport,
    private state: SessionState,
    private hooks: SequenceHooks = {},
  ) {}

  /** Runs the full sequence. `dwellMs` overrides the layout's per-target dwell. */
  start(layout: Layout, dwellMs?: number): void {
    if (this.running) throw new Error("calibration sequence already running");
    if (layout.targets.length === 0) throw new Error("layout has no targets");
    this.targets = layout.targets.slice().sort((a, b) => a.index - b.index);
    this.position = 0;
    this.dwellOverrideMs = dwellMs ?? null;
    this.running = true;
    this.paused = false;
    this.send({ type: "calib_start" });
    this.showCurrent();
  }

  /** Operator abort: calib_end is never sent; the service discards the partial session. */
  abort(): void {
    if (!this.running) return;
    this.stopTimer();
    this.running = false;
    this.paused = false;
    this.send({ type: "calib_abort" });
    this.state.toIdle();
    this.hooks.onAborted?.();
  }

  /** Full-screen was exited: freeze the dwell clock until resume(). */
  pause(): void {
    if (!this.running || this.paused) return;
    this.stopTimer();
    const elapsed = Date.now() - this.shownAt;
    this.remainingMs = Math.max(0, this.remainingMs - elapsed);
    this.paused = true;
    if (this.state.phase.kind === "calibrating") {
      this.state.toCalibrating(this.state.phase.targetIndex, this.remainingMs);
    }
  }

  resume(): void {
    if (!this.running || !this.paused) return;
    this.paused = false;
    this.armTimer(this.remainingMs);
  }

  /** The socket dropped: the run is abandoned, never silently resumed. */
  connectionLost(): void {
    if (!this.running) return;
    this.stopTimer();
    this.running = false;
    this.paused = false;
    this.state.toIdle("connection to the tracker lost -- calibration abandoned");
    this.hooks.onConnectionLost?.();
  }

  private dwellFor(target: TargetSpec): number {
    return this.dwellOverrideMs ?? Math.round(target.dwell * 1000);
  }

  private showCurrent(): void {
    const target = this.targets[this.position];
    const dwell = this.dwellFor(target);
    this.state.toCalibrating(target.index, dwell);
    this.send({ type: "target", index: target.index });
    this.hooks.showTarget?.(target);
    this.armTimer(dwell);
  }

  private armTimer(ms: number): void {
    this.shownAt = Date.now();
    this.remainingMs = ms;
    this.timer = setTimeout(() => this.advance(), ms);
  }

  private advance(): void {
    this.timer = null;
    this.position += 1;
    if (this.position < this.targets.length) {
      this.showCurrent();
      return;
    }
    this.running = false;
    this.send({ type: "calib_end" });
    this.state.toReport();
    this.hooks.onFinished?.();
  }

  private stopTimer(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private send(msg: ControlMessage): void {
    const problem = validateControl(msg);
    if (problem) throw new Error(`refusing to send invalid control: ${problem}`);
    this.transport.send(msg);
  }
}
