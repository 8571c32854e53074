/** Reader for the plain-text heat-map sidecar the service serves.
 *
 * Format: one header line `# mesh_sha256:<hex> role:<role> n:<count>`,
 * then `<vertex index> <weight>` per line. Weights are shortest-repr
 * doubles, so parseFloat recovers the server's bits exactly.
 */

export interface Sidecar {
  checksum: string;
  role: string;
  weights: Float64Array;
}

export function parseSidecar(text: string): Sidecar {
  const lines = text.split("\n").filter((line) => line.length > 0);
  const header = lines[0];
  if (!header || !header.startsWith("#")) {
    throw new Error("sidecar text is missing its header line");
  }
  const match = header.match(/^# mesh_sha256:(\S+) role:(\S+) n:(\d+)$/);
  if (!match) {
    throw new Error(`malformed sidecar header: ${header}`);
  }
  const count = Number(match[3]);
  const weights = new Float64Array(count);
  for (const line of lines.slice(1)) {
    const sep = line.indexOf(" ");
    const index = Number(line.slice(0, sep));
    if (!Number.isInteger(index) || index < 0 || index >= count) {
      throw new Error(`sidecar row out of range: ${line}`);
    }
    weights[index] = Number.parseFloat(line.slice(sep + 1));
  }
  return { checksum: match[1]!, role: match[2]!, weights };
}
