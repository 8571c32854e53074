/** Payload shapes for the /v1 service plus the painter's own view state. */

export type MapRole = "skin" | "density";
export type BrushShape = "sphere" | "box";
export type BrushFalloff = "constant" | "linear" | "smooth";

export interface BrushStroke {
  role: MapRole;
  shape: BrushShape;
  center: [number, number, number];
  /** Sphere radius, or per-axis half-extents for a box. */
  extent: number | [number, number, number];
  /** Signed: positive adds weight, negative subtracts. */
  strength: number;
  falloff: BrushFalloff;
}

export interface MeshPayload {
  vertices: number[][];
  faces: number[][];
  checksum: string;
}

export interface SessionInfo {
  session_id: string;
  name: string;
  versions: Record<MapRole, number>;
  mesh_checksum: string;
  generated: boolean;
  nodule_count: number;
}

export interface BrushResponse {
  version: number;
  updates: [number, number][];
}

export interface NodulePayload {
  id: number;
  position: [number, number, number];
  normal: [number, number, number];
  radius: number;
  cumulative_resistance: number;
}

export interface SamplingBody {
  minimum_distribution_distance?: number;
  fill_tolerance?: number;
  radius_factor?: number;
  max_samples?: number;
}

export interface GenerateBody {
  cutoff_tolerance?: number;
  resample_ratio?: number;
  thickness?: number;
  clearance?: number;
  seed?: number;
  allow_broken?: boolean;
  sampling?: SamplingBody;
  chain?: { start?: number; exhaustive?: boolean; trace_diameter?: number };
}

export interface GenerateResponse {
  shell: { vertices: number[][]; faces: number[][] };
  nodules: NodulePayload[];
  traces: number[][][];
  self_intersections: number;
  volume_cm3: number;
}

export interface TrajectoryBody {
  radius: number;
  step: number;
  waypoints: number[][];
}

export interface OptimizeBody {
  counts?: Record<number, number>;
  log_text?: string;
  trajectory?: TrajectoryBody;
  alpha?: number;
  filter_order?: number;
  normalize_counts?: boolean;
  onsets?: boolean;
}

export interface OptimizeResponse {
  density_version: number;
  nodules: NodulePayload[];
  traces: number[][][];
  nodules_before: number;
  nodules_after: number;
}

/** Camera pose and tool settings; exactly one map role is active. */
export interface ViewState {
  cameraPosition: [number, number, number];
  cameraTarget: [number, number, number];
  activeRole: MapRole;
  brush: {
    shape: BrushShape;
    radius: number; // > 0
    strength: number;
    falloff: BrushFalloff;
  };
  overlays: {
    heatmap: boolean;
    nodules: boolean;
    splines: boolean;
    traces: boolean;
  };
}

export function defaultViewState(): ViewState {
  return {
    cameraPosition: [0.25, -0.25, 0.25],
    cameraTarget: [0, 0, 0],
    activeRole: "skin",
    brush: { shape: "sphere", radius: 0.02, strength: 0.5, falloff: "smooth" },
    overlays: { heatmap: true, nodules: true, splines: true, traces: true },
  };
}

export function validateViewState(view: ViewState): void {
  if (!(view.brush.radius > 0)) {
    throw new Error(`brush radius must be positive, got ${view.brush.radius}`);
  }
  if (view.activeRole !== "skin" && view.activeRole !== "density") {
    throw new Error(`unknown map role ${view.activeRole}`);
  }
}
