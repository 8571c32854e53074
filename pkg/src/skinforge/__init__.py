"""Form-fitting tactile skin generation for robot link meshes.

Paint where skin should exist and how densely it should sense, and the
toolkit produces a printable two-material shell: an offset body with
embedded sensing nodules wired as a single serial RC chain, plus a
machine-readable manifest for calibration and analysis.
"""

from .chain import (CalibrationTable, ChainDesign, FilamentSpec,
                    assign_resistances, expected_rc_table, order_chain,
                    route_traces)
from .contacts import (ContactEvent, ContactHistogram, HeuristicParams,
                       SweepTrajectory, butterworth_weight,
                       histogram_from_events, ingest_contact_log,
                       optimize_heatmap, optimize_round, simulate_contacts)
from .cutout import (SkinShell, SubMesh, boundary_loops, extract_cutout,
                     extrude, smooth_cutout)
from .errors import (ChainDesignError, ConfigError, GeometryError,
                     SkinforgeError)
from .heatmap import (BrushStroke, HeatMap, apply_brush, load_heatmap,
                      save_heatmap, uniform_map)
from .intersect import detect_self_intersections, tri_tri_intersect
from .mesh import (TriMesh, is_watertight, load_mesh, save_obj, save_stl,
                   signed_volume, validate_mesh)
from .pipeline import (Characterization, PipelineConfig, RunResult, TOOL_VERSION,
                       build_manifest, characterize, load_config, run_pipeline,
                       serialize_manifest)
from .sampler import (Nodule, NoduleLayout, SamplingParams, assign_radii,
                      local_min_distance, sample_nodules)
from .snr import (CaptureTrace, PhaseStats, Protocol, SnrReport,
                  aggregate_trials, pairwise_min_snr, read_trace,
                  segment_trace, snr, synth_trace, write_trace)
from .spline import BoundarySpline, smooth_boundary

__version__ = TOOL_VERSION

__all__ = [
    "BoundarySpline", "BrushStroke", "CalibrationTable", "CaptureTrace",
    "ChainDesign", "ChainDesignError", "Characterization", "ConfigError",
    "ContactEvent", "ContactHistogram", "FilamentSpec", "GeometryError",
    "HeatMap", "HeuristicParams", "Nodule", "NoduleLayout", "PhaseStats",
    "PipelineConfig", "Protocol", "RunResult", "SamplingParams",
    "SkinShell", "SkinforgeError", "SnrReport", "SubMesh", "SweepTrajectory",
    "TriMesh", "aggregate_trials", "apply_brush", "assign_radii",
    "assign_resistances", "boundary_loops", "build_manifest",
    "butterworth_weight", "characterize", "detect_self_intersections",
    "expected_rc_table", "extract_cutout", "extrude", "histogram_from_events",
    "ingest_contact_log", "is_watertight", "load_config", "load_heatmap",
    "load_mesh", "local_min_distance", "optimize_heatmap", "optimize_round",
    "order_chain", "pairwise_min_snr", "read_trace", "route_traces",
    "run_pipeline", "sample_nodules", "save_heatmap", "save_obj", "save_stl",
    "segment_trace", "serialize_manifest", "signed_volume",
    "simulate_contacts", "smooth_boundary", "smooth_cutout", "snr",
    "synth_trace", "tri_tri_intersect", "uniform_map", "validate_mesh",
    "write_trace",
]
