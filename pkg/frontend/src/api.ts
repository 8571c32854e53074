/** Thin fetch client for the /v1 service. Raises ApiError on any non-2xx
 * answer, carrying the server's message and status so the UI can route 409
 * to the busy indicator and 4xx to inline error text. */

import type {
  BrushResponse,
  BrushStroke,
  GenerateBody,
  GenerateResponse,
  MapRole,
  MeshPayload,
  OptimizeBody,
  OptimizeResponse,
  SessionInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function infallible(resp: Response): Promise<Response> {
  if (resp.ok) return resp;
  let message = `${resp.status}`;
  try {
    const body = await resp.json();
    message = body.error ?? body.detail ?? JSON.stringify(body);
  } catch {
    message = await resp.text().catch(() => message);
  }
  throw new ApiError(resp.status, message);
}

export class SkinServiceClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}/v1${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    return (await infallible(await fetch(this.url(path)))).json();
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await infallible(resp)).json();
  }

  async createSession(
    name: string,
    vertices: number[][],
    faces: number[][],
    scale = 1.0,
  ): Promise<{ session_id: string; mesh: { n_vertices: number; n_faces: number; checksum: string } }> {
    return this.postJson("/sessions", {
      name,
      scale,
      source: { vertices, faces },
    });
  }

  async status(sid: string): Promise<SessionInfo> {
    return this.getJson(`/sessions/${sid}`);
  }

  async mesh(sid: string): Promise<MeshPayload> {
    return this.getJson(`/sessions/${sid}/mesh`);
  }

  /** Raw sidecar text; the server's bytes are authoritative for undo. */
  async heatmapText(sid: string, role: MapRole): Promise<string> {
    const resp = await infallible(
      await fetch(this.url(`/sessions/${sid}/heatmap/${role}`)),
    );
    return resp.text();
  }

  async putHeatmapText(sid: string, role: MapRole, text: string): Promise<number> {
    const resp = await fetch(this.url(`/sessions/${sid}/heatmap/${role}`), {
      method: "PUT",
      headers: { "content-type": "text/plain" },
      body: text,
    });
    const body = await (await infallible(resp)).json();
    return body.version;
  }

  async brush(sid: string, stroke: BrushStroke): Promise<BrushResponse> {
    return this.postJson(`/sessions/${sid}/brush`, stroke);
  }

  async generate(sid: string, body: GenerateBody): Promise<GenerateResponse> {
    return this.postJson(`/sessions/${sid}/generate`, body);
  }

  async optimize(sid: string, body: OptimizeBody): Promise<OptimizeResponse> {
    return this.postJson(`/sessions/${sid}/optimize`, body);
  }

  async manifestText(sid: string): Promise<string> {
    const resp = await infallible(
      await fetch(this.url(`/sessions/${sid}/manifest`)),
    );
    return resp.text();
  }
}
