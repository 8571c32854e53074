/** Offline brush fold, numerically identical to the server's.
 *
 * Every operation mirrors the service arithmetic in order and precision:
 * IEEE-754 doubles on both sides, squared-term summation left to right,
 * falloffs written with the same association. That is what makes the
 * replay equivalence check byte-exact rather than within-epsilon.
 */

import type { BrushFalloff, BrushStroke } from "./types.js";

function falloff(kind: BrushFalloff, t: number): number {
  if (kind === "constant") return 1.0;
  if (kind === "linear") return 1.0 - t;
  // cubic smoothstep, reversed so weight fades to 0 at the brush edge
  return 1.0 - (3.0 * t * t - 2.0 * t * t * t);
}

function clamp01(x: number): number {
  return Math.min(Math.max(x, 0.0), 1.0);
}

/** weight <- clamp(weight + strength * falloff, 0, 1), in place. */
export function applyBrush(
  weights: Float64Array,
  vertices: Float64Array, // flat xyz, length 3 * weights.length
  stroke: BrushStroke,
): Float64Array {
  const [cx, cy, cz] = stroke.center;
  const ext = stroke.extent;
  const sphere = stroke.shape === "sphere";
  const radius = typeof ext === "number" ? ext : ext[0];
  const hx = typeof ext === "number" ? ext : ext[0];
  const hy = typeof ext === "number" ? ext : ext[1];
  const hz = typeof ext === "number" ? ext : ext[2];

  for (let i = 0; i < weights.length; i++) {
    const dx = vertices[3 * i]! - cx;
    const dy = vertices[3 * i + 1]! - cy;
    const dz = vertices[3 * i + 2]! - cz;
    let inside: boolean;
    let t: number;
    if (sphere) {
      const dist = Math.sqrt(dx * dx + dy * dy + dz * dz);
      inside = dist <= radius;
      t = clamp01(dist / radius);
    } else {
      const qx = Math.abs(dx) / hx;
      const qy = Math.abs(dy) / hy;
      const qz = Math.abs(dz) / hz;
      inside = qx <= 1.0 && qy <= 1.0 && qz <= 1.0;
      t = clamp01(Math.max(Math.max(qx, qy), qz));
    }
    if (inside) {
      weights[i] = clamp01(
        weights[i]! + stroke.strength * falloff(stroke.falloff, t),
      );
    }
  }
  return weights;
}

/** Fold a recorded stroke list over a starting map (copying the input). */
export function foldStrokes(
  start: Float64Array,
  vertices: Float64Array,
  strokes: readonly BrushStroke[],
): Float64Array {
  const weights = start.slice();
  for (const stroke of strokes) applyBrush(weights, vertices, stroke);
  return weights;
}
