import { TrackerClient, defaultServiceUrl } from "./client.js";
import { SessionState } from "./state.js";
import { CalibrationSequence } from "./sequence.js";
import { renderGazeOverlay } from "./overlay.js";
import { showErrorReport } from "./report.js";
import type { Layout, TargetSpec } from "./protocol.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const banner = byId<HTMLDivElement>("banner");
const statusLine = byId<HTMLSpanElement>("status");
const dropsLine = byId<HTMLSpanElement>("drops");
const connectBtn = byId<HTMLButtonElement>("connect-btn");
const startBtn = byId<HTMLButtonElement>("start-btn");
const abortBtn = byId<HTMLButtonElement>("abort-btn");
const verifyBtn = byId<HTMLButtonElement>("verify-btn");
const backBtn = byId<HTMLButtonElement>("back-btn");
const stopVerifyBtn = byId<HTMLButtonElement>("stop-verify-btn");
const idleView = byId<HTMLDivElement>("idle-view");
const calibView = byId<HTMLDivElement>("calib-view");
const verifyView = byId<HTMLDivElement>("verify-view");
const reportView = byId<HTMLDivElement>("report-view");
const reportBody = byId<HTMLDivElement>("report-body");
const square = byId<HTMLDivElement>("target-square");
const targetLabel = byId<HTMLDivElement>("target-label");
const marker = byId<HTMLDivElement>("gaze-marker");
const previewFrame = byId<HTMLImageElement>("preview-frame");
const layoutPreview = byId<HTMLDivElement>("layout-preview");

const state = new SessionState();
const client = new TrackerClient();
const sequence = new CalibrationSequence(client, state, {
  showTarget: paintTarget,
  onFinished: () => {
    leaveFullscreen();
    render();
  },
  onAborted: render,
  onConnectionLost: render,
});

function paintTarget(target: TargetSpec): void {
  if (!state.layout) return;
  const [w, h] = state.layout.resolution;
  const [r, g, b] = target.color;
  square.style.background = `rgb(${r}, ${g}, ${b})`;
  square.style.left = `${(target.cx / w) * 100}%`;
  square.style.top = `${(target.cy / h) * 100}%`;
  square.style.width = `${(target.side / w) * 100}%`;
  square.style.height = `${(target.side / h) * 100}%`;
  targetLabel.textContent = `target ${target.index} / ${state.layout.targets.length}`;
}

// Static preview of all 20 squares at once, for the operator; the
// calibration itself always presents them sequentially.
function renderLayoutPreview(layout: Layout): void {
  layoutPreview.textContent = "";
  const [w, h] = layout.resolution;
  for (const t of layout.targets) {
    const sq = document.createElement("div");
    sq.className = "preview-square";
    const [r, g, b] = t.color;
    sq.style.background = `rgb(${r}, ${g}, ${b})`;
    sq.style.left = `${(t.cx / w) * 100}%`;
    sq.style.top = `${(t.cy / h) * 100}%`;
    sq.style.width = `${(t.side / w) * 100}%`;
    sq.style.height = `${(t.side / h) * 100}%`;
    sq.title = `target ${t.index}`;
    layoutPreview.appendChild(sq);
  }
}

function leaveFullscreen(): void {
  if (document.fullscreenElement) {
    document.exitFullscreen().catch(() => {});
  }
}

function render(): void {
  statusLine.textContent = state.connected ? "connected" : "disconnected";
  statusLine.className = state.connected ? "ok" : "bad";
  banner.textContent = state.banner ?? "";
  banner.style.display = state.banner ? "" : "none";
  idleView.style.display = state.phase.kind === "idle" ? "" : "none";
  calibView.style.display = state.phase.kind === "calibrating" ? "" : "none";
  verifyView.style.display = state.phase.kind === "verifying" ? "" : "none";
  reportView.style.display = state.phase.kind === "report" ? "" : "none";
  connectBtn.disabled = state.connected;
  startBtn.disabled = !state.connected || !state.layout || state.phase.kind !== "idle";
  verifyBtn.disabled = !state.connected || !state.report || state.report.model === null;
  if (state.phase.kind === "report") {
    showErrorReport(state.report, reportBody);
  }
}

client.onOpen = () => {
  state.connected = true;
  state.banner = null;
  render();
};

client.onClose = () => {
  state.connected = false;
  if (sequence.running) {
    sequence.connectionLost();
  } else if (state.phase.kind === "verifying") {
    state.toIdle("connection to the tracker lost");
  } else if (!state.banner) {
    state.banner = "connection to the tracker lost";
  }
  render();
};

client.onLayout = (layout) => {
  state.layout = layout;
  renderLayoutPreview(layout);
  render();
};

client.onGaze = (update) => {
  state.lastGaze = update;
  if (state.phase.kind === "verifying" && state.layout) {
    renderGazeOverlay(update, marker, state.layout.resolution);
  }
};

client.onFrame = (jpegB64) => {
  previewFrame.src = `data:image/jpeg;base64,${jpegB64}`;
  previewFrame.style.display = "";
};

client.onDrops = (count) => {
  dropsLine.textContent = `${count} updates dropped`;
};

client.onServiceError = (message) => {
  state.banner = `service error: ${message}`;
  render();
};

client.onReport = (report) => {
  state.toReport(report);
  render();
};

client.onEnd = () => {
  state.banner = "frame source ended";
  render();
};

connectBtn.onclick = () => {
  client.connect(defaultServiceUrl());
  render();
};

startBtn.onclick = () => {
  if (!state.layout) return;
  const begin = () => {
    sequence.start(state.layout as Layout);
    render();
  };
  const request = document.documentElement.requestFullscreen?.();
  if (request) {
    request.then(begin, () => {
      state.banner = "full screen refused -- running calibration windowed";
      begin();
    });
  } else {
    begin();
  }
};

abortBtn.onclick = () => {
  sequence.abort();
  leaveFullscreen();
  render();
};

verifyBtn.onclick = () => {
  state.toVerifying();
  render();
};

stopVerifyBtn.onclick = () => {
  state.toReport();
  render();
};

backBtn.onclick = () => {
  state.toIdle();
  render();
};

// Fixation geometry depends on full-screen: pause the dwell clock when
// it is exited and only continue once the operator re-enters it.
document.addEventListener("fullscreenchange", () => {
  if (!sequence.running) return;
  if (document.fullscreenElement) {
    state.banner = null;
    sequence.resume();
  } else {
    sequence.pause();
    state.banner = "full screen exited -- calibration paused";
  }
  render();
});

client.connect(defaultServiceUrl());
render();
