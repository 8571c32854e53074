/** Pure overlay helpers: weight coloring and nodule disc geometry.
 * Kept free of three.js so they run under node in tests.
 */

import type { NodulePayload } from "./types.js";

const COLD: [number, number, number] = [0.13, 0.2, 0.55];
const HOT: [number, number, number] = [0.95, 0.3, 0.08];

/** Linear cold-to-hot ramp over weight in [0, 1]. */
export function weightColor(w: number): [number, number, number] {
  const t = Math.min(Math.max(w, 0), 1);
  return [
    COLD[0] + (HOT[0] - COLD[0]) * t,
    COLD[1] + (HOT[1] - COLD[1]) * t,
    COLD[2] + (HOT[2] - COLD[2]) * t,
  ];
}

/** Per-vertex RGB buffer for a color attribute. */
export function colorBuffer(weights: Float64Array): Float32Array {
  const out = new Float32Array(weights.length * 3);
  for (let i = 0; i < weights.length; i++) {
    const [r, g, b] = weightColor(weights[i]!);
    out[3 * i] = r;
    out[3 * i + 1] = g;
    out[3 * i + 2] = b;
  }
  return out;
}

export interface Disc {
  center: [number, number, number];
  normal: [number, number, number];
  radius: number;
  label: string;
}

/** Discs drawn where nodules sit, sized by the server-assigned radius
 * and lifted a hair along the normal so they never z-fight the shell. */
export function noduleDiscs(nodules: NodulePayload[], lift = 1e-4): Disc[] {
  return nodules.map((n) => ({
    center: [
      n.position[0] + n.normal[0] * lift,
      n.position[1] + n.normal[1] * lift,
      n.position[2] + n.normal[2] * lift,
    ],
    normal: n.normal,
    radius: n.radius,
    label: `${n.id}: ${Math.round(n.cumulative_resistance)} kΩ`,
  }));
}

/** Flatten a trace polyline list into line-segment endpoints. */
export function traceSegments(traces: number[][][]): Float32Array {
  let count = 0;
  for (const poly of traces) count += Math.max(poly.length - 1, 0);
  const out = new Float32Array(count * 6);
  let k = 0;
  for (const poly of traces) {
    for (let i = 0; i + 1 < poly.length; i++) {
      const a = poly[i]!;
      const b = poly[i + 1]!;
      out[k++] = a[0]!;
      out[k++] = a[1]!;
      out[k++] = a[2]!;
      out[k++] = b[0]!;
      out[k++] = b[1]!;
      out[k++] = b[2]!;
    }
  }
  return out;
}
