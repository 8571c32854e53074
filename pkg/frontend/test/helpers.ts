/** Shared fixtures for the service-backed tests. */

import { SkinServiceClient } from "../src/api.js";
import { flatPlate, type PlateMesh } from "../src/plate.js";
import type { BrushStroke, GenerateBody } from "../src/types.js";

export const SERVICE_PORT = 8977;
export const BASE_URL = `http://127.0.0.1:${SERVICE_PORT}`;

/** sha256 the service reports for flatPlate(0.2, 10); pinning it proves
 * the TypeScript plate is bit-identical to the server's own fixture. */
export const PLATE_CHECKSUM =
  "1755858afe0d07981b5e39952aea0b5869da58e5347a8a15d7f12184a0dac424";

export const PLATE: PlateMesh = flatPlate(0.2, 10);

/** Generation settings whose output on the plate is a known 6-nodule,
 * 5-trace layout. */
export const GOLDEN_BODY: GenerateBody = {
  seed: 3,
  sampling: { minimum_distribution_distance: 0.05, max_samples: 6 },
};

export function client(): SkinServiceClient {
  return new SkinServiceClient(BASE_URL);
}

export async function openPlate(
  api: SkinServiceClient,
  name: string,
): Promise<string> {
  const created = await api.createSession(name, PLATE.vertices, PLATE.faces);
  return created.session_id;
}

export function sameBytes(a: Float64Array, b: Float64Array): boolean {
  return (
    a.length === b.length &&
    Buffer.from(a.buffer, a.byteOffset, a.byteLength).equals(
      Buffer.from(b.buffer, b.byteOffset, b.byteLength),
    )
  );
}

/** Sidecar text for a constant-weight map, accepted by PUT /heatmap. */
export function uniformSidecar(
  checksum: string,
  role: string,
  n: number,
  weight: string,
): string {
  const lines = [`# mesh_sha256:${checksum} role:${role} n:${n}`];
  for (let i = 0; i < n; i++) lines.push(`${i} ${weight}`);
  return lines.join("\n") + "\n";
}

/** A recorded 20-stroke painting session on the skin map: an erase drag
 * across the diagonal, a linear-falloff sweep, two box erases, then a
 * set of partial refills. Maps start saturated at 1.0, so the session
 * leads with negative strengths. */
export const RECORDED_SESSION: BrushStroke[] = [
  { role: "skin", shape: "sphere", center: [-0.08, -0.08, 0], extent: 0.045, strength: -0.6, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [-0.05, -0.05, 0], extent: 0.045, strength: -0.6, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [-0.02, -0.02, 0], extent: 0.045, strength: -0.6, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [0.01, 0.01, 0], extent: 0.045, strength: -0.6, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [0.04, 0.04, 0], extent: 0.045, strength: -0.6, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [0.07, 0.07, 0], extent: 0.045, strength: -0.6, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [-0.09, 0.05, 0], extent: 0.05, strength: -0.35, falloff: "linear" },
  { role: "skin", shape: "sphere", center: [-0.05, 0.05, 0], extent: 0.05, strength: -0.35, falloff: "linear" },
  { role: "skin", shape: "sphere", center: [-0.01, 0.05, 0], extent: 0.05, strength: -0.35, falloff: "linear" },
  { role: "skin", shape: "sphere", center: [0.03, 0.05, 0], extent: 0.05, strength: -0.35, falloff: "linear" },
  { role: "skin", shape: "box", center: [0.06, -0.05, 0], extent: [0.05, 0.03, 0.02], strength: -0.8, falloff: "constant" },
  { role: "skin", shape: "box", center: [-0.05, 0.06, 0], extent: [0.05, 0.03, 0.02], strength: -0.8, falloff: "constant" },
  { role: "skin", shape: "sphere", center: [-0.06, -0.02, 0], extent: 0.04, strength: 0.3, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [-0.02, -0.02, 0], extent: 0.04, strength: 0.3, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [0.02, -0.02, 0], extent: 0.04, strength: 0.3, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [0.06, -0.02, 0.01], extent: 0.04, strength: 0.3, falloff: "smooth" },
  { role: "skin", shape: "sphere", center: [0, 0, 0], extent: 0.035, strength: 1.5, falloff: "constant" },
  { role: "skin", shape: "sphere", center: [0, 0.05, 0], extent: 0.03, strength: -1.2, falloff: "smooth" },
  { role: "skin", shape: "box", center: [-0.04, -0.04, 0], extent: 0.06, strength: 0.45, falloff: "linear" },
  { role: "skin", shape: "sphere", center: [0.02, 0, 0], extent: 0.08, strength: 0.25, falloff: "smooth" },
];
