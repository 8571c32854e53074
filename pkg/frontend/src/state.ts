/** Session state for the painter.
 *
 * The client is deliberately thin: the server owns every heat map, layout,
 * and manifest. What lives here is a mirror that folds server brush
 * responses into local arrays for drawing, plus the undo machinery. Undo
 * snapshots are the server's own sidecar bytes, captured before a stroke
 * and restored with PUT, so a full undo/redo cycle leaves the server map
 * byte-identical rather than merely close. After a reload everything in
 * this object can be rebuilt from GET endpoints alone; see reconnect().
 */

import { ApiError, SkinServiceClient } from "./api.js";
import { parseSidecar } from "./sidecar.js";
import type {
  BrushStroke,
  GenerateBody,
  GenerateResponse,
  MapRole,
  MeshPayload,
  OptimizeBody,
  OptimizeResponse,
  ViewState,
} from "./types.js";
import { defaultViewState } from "./types.js";

/** Matches the toolkit's own warning for a histogram with no contacts.
 * The server only logs it, so the client raises it for the case it can
 * see coming: a counts payload that is all zeros. */
export const ZERO_CONTACT_WARNING =
  "all contact counts are zero; density map is empty";

interface UndoEntry {
  role: MapRole;
  /** Server sidecar text captured before and after the stroke. */
  before: string;
  after: string;
}

export class PainterState {
  view: ViewState = defaultViewState();
  maps: Record<MapRole, Float64Array>;
  versions: Record<MapRole, number>;
  preview: GenerateResponse | null = null;
  previewStale = false;
  optimizeSummary: { before: number; after: number } | null = null;
  /** Inline message from the last failed generate/optimize, or null. */
  lastError: string | null = null;
  warning: string | null = null;
  /** True while a generate or optimize request is in flight. */
  busy = false;

  private undoStack: UndoEntry[] = [];
  private redoStack: UndoEntry[] = [];

  private constructor(
    readonly api: SkinServiceClient,
    readonly sessionId: string,
    readonly mesh: MeshPayload,
    maps: Record<MapRole, Float64Array>,
    versions: Record<MapRole, number>,
  ) {
    this.maps = maps;
    this.versions = versions;
  }

  static async open(
    api: SkinServiceClient,
    name: string,
    vertices: number[][],
    faces: number[][],
  ): Promise<PainterState> {
    const created = await api.createSession(name, vertices, faces);
    return PainterState.reconnect(api, created.session_id);
  }

  /** Rebuild the full painter state from GET endpoints only.
   *
   * This is the reload path: no locally cached bytes survive, yet the
   * mesh, both heat maps, their versions, and the last generated layout
   * all come back. Shell and trace previews are recomputed server side,
   * so after a reload they are absent until the next generate; the
   * authoritative nodule layout still loads from the manifest.
   */
  static async reconnect(
    api: SkinServiceClient,
    sessionId: string,
  ): Promise<PainterState> {
    const info = await api.status(sessionId);
    const mesh = await api.mesh(sessionId);
    const maps = {} as Record<MapRole, Float64Array>;
    for (const role of ["skin", "density"] as const) {
      maps[role] = parseSidecar(await api.heatmapText(sessionId, role)).weights;
    }
    const state = new PainterState(api, sessionId, mesh, maps, {
      skin: info.versions.skin,
      density: info.versions.density,
    });
    if (info.generated) {
      const manifest = JSON.parse(await api.manifestText(sessionId));
      state.preview = {
        shell: { vertices: [], faces: [] },
        nodules: manifest.nodules,
        traces: [],
        self_intersections: 0,
        volume_cm3: 0,
      };
      state.previewStale = true; // shell/trace geometry needs a regenerate
    }
    return state;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  get canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  /** Send one stroke through the server and fold its reply locally. */
  async paintStroke(stroke: BrushStroke): Promise<void> {
    const before = await this.api.heatmapText(this.sessionId, stroke.role);
    const reply = await this.api.brush(this.sessionId, stroke);
    const weights = this.maps[stroke.role];
    for (const [index, weight] of reply.updates) {
      weights[index] = weight;
    }
    this.versions[stroke.role] = reply.version;
    if (this.preview !== null) this.previewStale = true;
    const after = await this.api.heatmapText(this.sessionId, stroke.role);
    this.undoStack.push({ role: stroke.role, before, after });
    this.redoStack.length = 0;
  }

  async undo(): Promise<void> {
    const entry = this.undoStack.pop();
    if (!entry) return;
    await this.restore(entry.role, entry.before);
    this.redoStack.push(entry);
  }

  async redo(): Promise<void> {
    const entry = this.redoStack.pop();
    if (!entry) return;
    await this.restore(entry.role, entry.after);
    this.undoStack.push(entry);
  }

  private async restore(role: MapRole, text: string): Promise<void> {
    const version = await this.api.putHeatmapText(this.sessionId, role, text);
    this.maps[role] = parseSidecar(text).weights;
    this.versions[role] = version;
    if (this.preview !== null) this.previewStale = true;
  }

  /** POST /generate; 422 (empty cutout, bad geometry) lands in lastError. */
  async regeneratePreview(body: GenerateBody): Promise<GenerateResponse | null> {
    if (this.busy) return null; // one in-flight generate/optimize at a time
    this.busy = true;
    this.lastError = null;
    try {
      const preview = await this.api.generate(this.sessionId, body);
      this.preview = preview;
      this.previewStale = false;
      return preview;
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = err.message;
        return null;
      }
      throw err;
    } finally {
      this.busy = false;
    }
  }

  /** POST /optimize, then refresh the density overlay from the server. */
  async runOptimization(body: OptimizeBody): Promise<OptimizeResponse | null> {
    if (this.busy) return null;
    this.warning = null;
    if (body.counts && Object.values(body.counts).every((c) => c === 0)) {
      this.warning = ZERO_CONTACT_WARNING;
      return null;
    }
    this.busy = true;
    this.lastError = null;
    try {
      const reply = await this.api.optimize(this.sessionId, body);
      this.optimizeSummary = {
        before: reply.nodules_before,
        after: reply.nodules_after,
      };
      if (this.preview) {
        this.preview = {
          ...this.preview,
          nodules: reply.nodules,
          traces: reply.traces,
        };
      }
      this.versions.density = reply.density_version;
      const text = await this.api.heatmapText(this.sessionId, "density");
      this.maps.density = parseSidecar(text).weights;
      return reply;
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = err.message;
        return null;
      }
      throw err;
    } finally {
      this.busy = false;
    }
  }
}

/** Coalesces drag samples so the server sees at most one stroke request
 * per interval. The first sample in a quiet period goes out immediately;
 * later samples replace each other and the newest one flushes when the
 * window closes. */
export class StrokeBatcher {
  private pending: BrushStroke | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private chain: Promise<void> = Promise.resolve();

  constructor(
    private readonly send: (stroke: BrushStroke) => Promise<void>,
    private readonly intervalMs = 50,
  ) {}

  offer(stroke: BrushStroke): void {
    if (this.timer === null) {
      this.dispatch(stroke);
      this.timer = setTimeout(() => this.tick(), this.intervalMs);
    } else {
      this.pending = stroke;
    }
  }

  /** Send any held sample now (pointer up). */
  async flush(): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.pending !== null) {
      const stroke = this.pending;
      this.pending = null;
      this.dispatch(stroke);
    }
    await this.chain;
  }

  private tick(): void {
    this.timer = null;
    if (this.pending !== null) {
      const stroke = this.pending;
      this.pending = null;
      this.dispatch(stroke);
      this.timer = setTimeout(() => this.tick(), this.intervalMs);
    }
  }

  private dispatch(stroke: BrushStroke): void {
    this.chain = this.chain.then(() => this.send(stroke));
  }
}
