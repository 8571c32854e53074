/** Undo restores the server's pre-stroke bytes, not an approximation.
 * Snapshots are the server's own sidecar text, so clamping losses in the
 * brush math cannot leak into the round trip.
 */

import { describe, expect, it } from "vitest";
import { PainterState } from "../src/state.js";
import type { BrushStroke } from "../src/types.js";
import { client, PLATE, sameBytes } from "./helpers.js";

const api = client();

const STROKE: BrushStroke = {
  role: "skin",
  shape: "sphere",
  center: [0.02, -0.03, 0],
  extent: 0.05,
  strength: -0.7,
  falloff: "smooth",
};

async function freshState(name: string): Promise<PainterState> {
  return PainterState.open(api, name, PLATE.vertices, PLATE.faces);
}

describe("undo and redo", () => {
  it("leaves the server map byte-identical after stroke then undo", async () => {
    const state = await freshState("undo-bytes");
    const before = await api.heatmapText(state.sessionId, "skin");

    await state.paintStroke(STROKE);
    const painted = await api.heatmapText(state.sessionId, "skin");
    expect(painted).not.toBe(before);

    await state.undo();
    expect(await api.heatmapText(state.sessionId, "skin")).toBe(before);
    // the local overlay mirrors the restored bytes too
    const allOnes = new Float64Array(PLATE.vertices.length).fill(1.0);
    expect(sameBytes(state.maps.skin, allOnes)).toBe(true);
  });

  it("redo restores the post-stroke bytes exactly", async () => {
    const state = await freshState("redo-bytes");
    await state.paintStroke(STROKE);
    const painted = await api.heatmapText(state.sessionId, "skin");

    await state.undo();
    await state.redo();
    expect(await api.heatmapText(state.sessionId, "skin")).toBe(painted);
    expect(state.canRedo).toBe(false);
    expect(state.canUndo).toBe(true);
  });

  it("survives a full multi-stroke unwind", async () => {
    const state = await freshState("deep-undo");
    const start = await api.heatmapText(state.sessionId, "skin");
    const strokes: BrushStroke[] = [
      STROKE,
      { ...STROKE, center: [-0.04, 0.04, 0], strength: -0.4 },
      { ...STROKE, shape: "box", extent: 0.03, strength: 0.2, falloff: "linear" },
    ];
    for (const s of strokes) await state.paintStroke(s);
    for (let i = 0; i < strokes.length; i++) await state.undo();
    expect(await api.heatmapText(state.sessionId, "skin")).toBe(start);
    expect(state.canUndo).toBe(false);
  });

  it("a new stroke clears the redo branch", async () => {
    const state = await freshState("redo-clear");
    await state.paintStroke(STROKE);
    await state.undo();
    expect(state.canRedo).toBe(true);
    await state.paintStroke({ ...STROKE, strength: -0.1 });
    expect(state.canRedo).toBe(false);
  });
});
