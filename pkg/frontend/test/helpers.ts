import type { ControlMessage, Layout, TargetSpec } from "../src/protocol.js";
import { validateControl } from "../src/protocol.js";

// The published per-section error table: 4 rows x 5 columns, mean 1.7.
export const TABLE1_CELLS = [
  [1, 2, 1, 1, 2],
  [1, 2, 1, 2, 2],
  [1, 2, 2, 2, 3],
  [2, 1, 2, 2, 2],
];

/** A plausible 4x5 layout in the same shape the service sends. */
export function testLayout(dwell = 5.0): Layout {
  const targets: TargetSpec[] = [];
  for (let row = 1; row <= 4; row++) {
    for (let col = 1; col <= 5; col++) {
      const index = (row - 1) * 5 + col;
      targets.push({
        index,
        row,
        col,
        cx: col * 227 - 90,
        cy: row * 153 - 57,
        side: 78,
        color: [
          ((index * 37) % 200) + 55,
          ((index * 91) % 200) + 55,
          ((index * 53) % 200) + 55,
        ],
        dwell,
      });
    }
  }
  return { resolution: [1366, 768], targets };
}

// Transport double that records what a real socket would have carried
// and checks every message against the outbound schema.
export class CapturingTransport {
  sent: any[] = [];
  schemaProblems: string[] = [];

  send(msg: ControlMessage): void {
    const onTheWire = JSON.parse(JSON.stringify(msg));
    const problem = validateControl(onTheWire);
    if (problem) this.schemaProblems.push(problem);
    this.sent.push(onTheWire);
  }
}
