import type { GazeUpdate } from "./protocol.js";

// Live gaze marker for the verification phase. Mapped coordinates
// arrive in screen pixels; the marker is positioned with percentages so
// it scales with whatever box it is absolutely positioned inside.
// Updates without a mapped point hide the marker; mapped points outside
// the screen are clamped to the nearest edge and flagged.
export function renderGazeOverlay(
  update: GazeUpdate,
  marker: HTMLElement,
  resolution: [number, number],
): void {
  if (update.sx === null || update.sy === null) {
    marker.style.display = "none";
    return;
  }
  const [w, h] = resolution;
  const x = Math.min(Math.max(update.sx, 0), w);
  const y = Math.min(Math.max(update.sy, 0), h);
  const offscreen = x !== update.sx || y !== update.sy;
  marker.style.display = "";
  marker.style.left = `${(x / w) * 100}%`;
  marker.style.top = `${(y / h) * 100}%`;
  marker.classList.toggle("offscreen", offscreen);
}
