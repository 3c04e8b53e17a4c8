import type { ErrorReport } from "./protocol.js";

function deg(value: number): string {
  return value.toFixed(1);
}

// Renders the 4x5 error grid and overall mean exactly as the service
// reported them. The UI does no averaging or rounding of its own beyond
// fixed-point display formatting, so the numbers shown always match the
// session file the service wrote.
export function showErrorReport(report: ErrorReport | null, container: HTMLElement): void {
  container.textContent = "";
  const doc = container.ownerDocument;

  if (!report) {
    const p = doc.createElement("p");
    p.className = "empty";
    p.textContent =
      "No report yet. Connect to the tracker and run a calibration to see per-section error.";
    container.appendChild(p);
    return;
  }

  if (report.error) {
    const p = doc.createElement("p");
    p.className = "report-error";
    p.textContent = `Calibration failed: ${report.error}`;
    container.appendChild(p);
  }

  if (report.cells && report.mean_deg !== null) {
    const table = doc.createElement("table");
    table.className = "error-grid";
    for (const row of report.cells) {
      const tr = doc.createElement("tr");
      for (const value of row) {
        const td = doc.createElement("td");
        td.textContent = deg(value);
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
    container.appendChild(table);

    const mean = doc.createElement("p");
    mean.className = "mean-deg";
    mean.textContent = `Mean error ${deg(report.mean_deg)}°`;
    container.appendChild(mean);
  }

  const meta = doc.createElement("p");
  meta.className = "report-meta";
  meta.textContent = `${report.samples} samples recorded`;
  container.appendChild(meta);

  const link = doc.createElement("a");
  link.className = "session-link";
  link.href = report.session;
  link.setAttribute("download", "");
  link.textContent = `Download session (${report.session})`;
  container.appendChild(link);
}
