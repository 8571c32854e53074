/** Demo mesh: a flat square plate, bit-identical to the service's own
 * plate fixture so a session opened from it hashes to the same checksum.
 * linspace is spelled out because the endpoint handling (last knot is
 * the exact stop value, not start + n * step) is part of that identity.
 */

export interface PlateMesh {
  vertices: number[][];
  faces: number[][];
}

function linspace(start: number, stop: number, divisions: number): number[] {
  const step = (stop - start) / divisions;
  const out = new Array<number>(divisions + 1);
  for (let i = 0; i <= divisions; i++) out[i] = i * step + start;
  out[divisions] = stop;
  return out;
}

export function flatPlate(size = 0.1, divisions = 10): PlateMesh {
  const xs = linspace(-size / 2, size / 2, divisions);
  const ny = divisions + 1;
  const vertices: number[][] = [];
  for (let i = 0; i < ny; i++) {
    for (let j = 0; j < ny; j++) {
      vertices.push([xs[i]!, xs[j]!, 0]);
    }
  }
  const vid = (i: number, j: number) => i * ny + j;
  const faces: number[][] = [];
  for (let i = 0; i < divisions; i++) {
    for (let j = 0; j < divisions; j++) {
      const a = vid(i, j);
      const b = vid(i + 1, j);
      const c = vid(i + 1, j + 1);
      const d = vid(i, j + 1);
      faces.push([a, b, c]);
      faces.push([a, c, d]);
    }
  }
  return { vertices, faces };
}
