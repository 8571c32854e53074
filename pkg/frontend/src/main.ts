/** Browser entry point: wires the control panel to PainterState and the
 * three.js viewer. One session per tab; reloading reconnects to the same
 * session id (kept in the URL hash) and rebuilds every overlay from GETs.
 */

import { SkinServiceClient } from "./api.js";
import { flatPlate } from "./plate.js";
import { PainterState, StrokeBatcher } from "./state.js";
import type { BrushFalloff, BrushShape, GenerateBody, MapRole } from "./types.js";
import { validateViewState } from "./types.js";
import { Viewer } from "./viewer.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const api = new SkinServiceClient(
    (window as { SKINFORGE_URL?: string }).SKINFORGE_URL ??
      "http://127.0.0.1:8765",
  );

  const existing = window.location.hash.replace(/^#/, "");
  let state: PainterState;
  if (existing) {
    state = await PainterState.reconnect(api, existing);
  } else {
    const plate = flatPlate(0.2, 10);
    state = await PainterState.open(api, "painter", plate.vertices, plate.faces);
    window.location.hash = state.sessionId;
  }

  const batcher = new StrokeBatcher((s) => state.paintStroke(s));
  const canvas = el<HTMLCanvasElement>("viewport");
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  const viewer = new Viewer(canvas, state, batcher);
  viewer.refreshOverlays();

  const statusLine = el<HTMLElement>("status");
  const renderStatus = () => {
    const bits = [
      `skin v${state.versions.skin}`,
      `density v${state.versions.density}`,
    ];
    if (state.busy) bits.push("working…");
    if (state.previewStale) bits.push("preview stale");
    if (state.warning) bits.push(state.warning);
    if (state.lastError) bits.push(`error: ${state.lastError}`);
    statusLine.textContent = bits.join(" | ");
    statusLine.classList.toggle("error", state.lastError !== null);
  };
  renderStatus();
  setInterval(renderStatus, 250);

  el<HTMLSelectElement>("role").addEventListener("change", (e) => {
    state.view.activeRole = (e.target as HTMLSelectElement).value as MapRole;
    validateViewState(state.view);
    viewer.refreshColors();
  });
  el<HTMLSelectElement>("shape").addEventListener("change", (e) => {
    state.view.brush.shape = (e.target as HTMLSelectElement).value as BrushShape;
  });
  el<HTMLSelectElement>("falloff").addEventListener("change", (e) => {
    state.view.brush.falloff = (e.target as HTMLSelectElement)
      .value as BrushFalloff;
  });
  el<HTMLInputElement>("radius").addEventListener("input", (e) => {
    state.view.brush.radius = Number((e.target as HTMLInputElement).value);
    validateViewState(state.view);
  });
  el<HTMLInputElement>("strength").addEventListener("input", (e) => {
    state.view.brush.strength = Number((e.target as HTMLInputElement).value);
  });
  for (const key of ["heatmap", "nodules", "traces"] as const) {
    el<HTMLInputElement>(`show-${key}`).addEventListener("change", (e) => {
      state.view.overlays[key] = (e.target as HTMLInputElement).checked;
    });
  }

  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    void state.undo().then(() => viewer.refreshColors());
  });
  el<HTMLButtonElement>("redo").addEventListener("click", () => {
    void state.redo().then(() => viewer.refreshColors());
  });

  el<HTMLButtonElement>("generate").addEventListener("click", () => {
    const body: GenerateBody = {
      cutoff_tolerance: Number(el<HTMLInputElement>("cutoff").value),
      thickness: Number(el<HTMLInputElement>("thickness").value),
      seed: Number(el<HTMLInputElement>("seed").value),
      sampling: {
        minimum_distribution_distance: Number(el<HTMLInputElement>("dmin").value),
        radius_factor: Number(el<HTMLInputElement>("radius-factor").value),
      },
    };
    void state.regeneratePreview(body).then(() => {
      viewer.refreshOverlays();
      renderStatus();
    });
  });

  el<HTMLButtonElement>("optimize").addEventListener("click", () => {
    const counts: Record<number, number> = {};
    for (const pair of el<HTMLInputElement>("counts").value.split(",")) {
      const [id, count] = pair.split(":").map((s) => Number(s.trim()));
      if (Number.isFinite(id) && Number.isFinite(count)) counts[id!] = count!;
    }
    void state
      .runOptimization({
        counts,
        alpha: Number(el<HTMLInputElement>("alpha").value) || undefined,
        filter_order: Number(el<HTMLInputElement>("order").value),
      })
      .then(() => {
        viewer.refreshOverlays();
        viewer.refreshColors();
        renderStatus();
        if (state.optimizeSummary) {
          el<HTMLElement>("opt-summary").textContent =
            `${state.optimizeSummary.before} nodules before, ` +
            `${state.optimizeSummary.after} after`;
        }
      });
  });
}

void boot().catch((err) => {
  const node = document.getElementById("status");
  if (node) node.textContent = String(err);
});
