"""End-to-end run: config in, printable skin unit out.

Stages run in a fixed order (mesh load, heat maps, cutout and shell,
nodule sampling, optional contact optimization, chain design, export) and
any failure aborts with the stage name prefixed to the cause. For a fixed
seed the whole run is deterministic down to the exported bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .chain import (HARD_SPACING_FLOOR, ChainDesign, FilamentSpec,
                    assign_resistances, expected_rc_table, order_chain,
                    route_traces)
from .contacts import (HeuristicParams, SweepTrajectory, histogram_from_events,
                       ingest_contact_log, optimize_heatmap, simulate_contacts)
from .cutout import SkinShell, SubMesh, extract_cutout, extrude, smooth_cutout
from .errors import ConfigError, GeometryError, SkinforgeError
from .heatmap import (FALLOFFS, SHAPES, BrushStroke, HeatMap, apply_brush,
                      load_heatmap, save_heatmap, uniform_map)
from .intersect import detect_self_intersections
from .mesh import (TriMesh, is_watertight, load_mesh, signed_volume,
                   stl_bytes, validate_mesh)
from .sampler import NoduleLayout, SamplingParams, assign_radii, sample_nodules
from .solids import conductive_bodies

try:
    from importlib.metadata import version as _dist_version
    TOOL_VERSION = _dist_version("skinforge")
except Exception:  # not installed; running from a checkout
    TOOL_VERSION = "0.0.0+local"

DEFAULT_CUTOFF = 0.5
DEFAULT_RESAMPLE_RATIO = 0.5
DEFAULT_THICKNESS = 0.003
DEFAULT_TRACE_DIAMETER = 0.0015


@contextmanager
def _stage(name: str):
    try:
        yield
    except SkinforgeError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def _take(table: dict, where: str):
    def get(key, default):
        return table.pop(key, default)
    def done():
        if table:
            raise ConfigError(f"unknown keys in [{where}]: {sorted(table)}")
    return get, done


@dataclass(frozen=True)
class MapSource:
    """Where a heat map comes from: sidecar file, uniform value, brushes."""

    sidecar: Path | None = None
    value: float = 1.0
    brushes: tuple[BrushStroke, ...] = ()

    def build(self, mesh: TriMesh, role: str) -> HeatMap:
        if self.sidecar is not None:
            hmap = load_heatmap(self.sidecar, mesh, role)
        else:
            hmap = uniform_map(mesh, self.value, role)
        for stroke in self.brushes:
            hmap = apply_brush(hmap, stroke)
        return hmap


def _parse_brush(entry: dict, where: str) -> BrushStroke:
    get, done = _take(dict(entry), where)
    shape = get("shape", "sphere")
    center = get("center", None)
    extent = get("extent", None)
    strength = get("strength", None)
    falloff = get("falloff", "smooth")
    done()
    if center is None or extent is None or strength is None:
        raise ConfigError(f"[{where}] needs center, extent, and strength")
    if shape not in SHAPES or falloff not in FALLOFFS:
        raise ConfigError(f"[{where}] has unknown shape or falloff")
    if isinstance(extent, list):
        extent = tuple(float(e) for e in extent)
    return BrushStroke(shape=shape, center=tuple(float(c) for c in center),
                       extent=extent, strength=float(strength),
                       falloff=falloff)


def _parse_map_source(table: dict | None, where: str, base: Path) -> MapSource:
    if table is None:
        return MapSource()
    get, done = _take(dict(table), where)
    sidecar = get("sidecar", None)
    value = float(get("value", 1.0))
    brush_entries = get("brush", [])
    done()
    brushes = tuple(_parse_brush(b, f"{where}.brush") for b in brush_entries)
    return MapSource(sidecar=None if sidecar is None else base / sidecar,
                     value=value, brushes=brushes)


@dataclass(frozen=True)
class PipelineConfig:
    mesh_path: Path
    name: str = ""
    scale: float = 1.0
    weld_tolerance: float = 1e-6
    skin: MapSource = MapSource()
    density: MapSource = MapSource()
    cutoff_tolerance: float = DEFAULT_CUTOFF
    resample_ratio: float = DEFAULT_RESAMPLE_RATIO
    thickness: float = DEFAULT_THICKNESS
    clearance: float = 0.0
    sampling: SamplingParams = SamplingParams()
    heuristic: HeuristicParams = HeuristicParams()
    filament: FilamentSpec | None = None  # None: spacing tied to sampling
    chain_start: int = 0
    chain_exhaustive: bool = False
    trace_diameter: float = DEFAULT_TRACE_DIAMETER
    contact_log: Path | None = None
    trajectory: SweepTrajectory | None = None
    contact_onsets: bool = False
    out_dir: Path = Path("out")
    seed: int = 0
    allow_broken: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            object.__setattr__(self, "name", Path(self.mesh_path).stem)
        if not 0.0 <= self.cutoff_tolerance < 1.0:
            raise ConfigError("cutoff_tolerance must lie in [0, 1)")
        if not 0.0 < self.resample_ratio <= 1.0:
            raise ConfigError("resample_ratio must lie in (0, 1]")
        if self.thickness <= 0 or self.clearance < 0:
            raise ConfigError("thickness must be positive, clearance >= 0")
        if self.trace_diameter <= 0:
            raise ConfigError("trace_diameter must be positive")
        if self.contact_log is not None and self.trajectory is not None:
            raise ConfigError("give a contact log or a trajectory, not both")
        object.__setattr__(self, "sampling",
                           replace(self.sampling, seed=self.seed))

    @property
    def filament_spec(self) -> FilamentSpec:
        if self.filament is not None:
            return self.filament
        spacing = max(HARD_SPACING_FLOOR,
                      self.sampling.minimum_distribution_distance)
        return FilamentSpec(min_nodule_spacing=spacing)

    @property
    def has_contacts(self) -> bool:
        return self.contact_log is not None or self.trajectory is not None


def load_config(path: str | Path, *, seed: int | None = None,
                scale: float | None = None, out_dir: str | Path | None = None,
                allow_broken: bool | None = None) -> PipelineConfig:
    """Parse a TOML config; keyword arguments override file values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    base = path.parent

    get, done = _take(raw, "top level")
    name = get("name", "")
    run_seed = get("seed", 0)
    mesh_tbl = get("mesh", None)
    skin_tbl = get("skin", None)
    density_tbl = get("density", None)
    cutout_tbl = get("cutout", {})
    sampling_tbl = get("sampling", {})
    heuristic_tbl = get("heuristic", {})
    filament_tbl = get("filament", None)
    chain_tbl = get("chain", {})
    contacts_tbl = get("contacts", None)
    output_tbl = get("output", {})
    done()

    if mesh_tbl is None or "path" not in mesh_tbl:
        raise ConfigError("config needs [mesh] with a path")
    mget, mdone = _take(dict(mesh_tbl), "mesh")
    mesh_path = base / mget("path", None)
    mesh_scale = float(mget("scale", 1.0))
    weld_tol = float(mget("weld_tolerance", 1e-6))
    mdone()

    cget, cdone = _take(dict(cutout_tbl), "cutout")
    cutoff = float(cget("cutoff_tolerance", DEFAULT_CUTOFF))
    ratio = float(cget("resample_ratio", DEFAULT_RESAMPLE_RATIO))
    thickness = float(cget("thickness", DEFAULT_THICKNESS))
    clearance = float(cget("clearance", 0.0))
    cdone()

    sget, sdone = _take(dict(sampling_tbl), "sampling")
    sampling = SamplingParams(
        minimum_distribution_distance=float(
            sget("minimum_distribution_distance", 0.06)),
        fill_tolerance=float(sget("fill_tolerance", 0.15)),
        radius_factor=float(sget("radius_factor", 0.25)),
        max_samples=int(sget("max_samples", 256)))
    sdone()

    hget, hdone = _take(dict(heuristic_tbl), "heuristic")
    alpha = hget("alpha", None)
    heuristic = HeuristicParams(
        alpha=None if alpha is None else float(alpha),
        filter_order=int(hget("filter_order", 2)),
        normalize_counts=bool(hget("normalize_counts", True)))
    hdone()

    filament = None
    if filament_tbl is not None:
        fget, fdone = _take(dict(filament_tbl), "filament")
        filament = FilamentSpec(
            resistivity=float(fget("resistivity", 256.0)),
            min_nodule_spacing=float(fget("min_nodule_spacing", 0.06)),
            margin=float(fget("margin", 20.0)))
        fdone()

    chget, chdone = _take(dict(chain_tbl), "chain")
    chain_start = int(chget("start", 0))
    chain_exhaustive = bool(chget("exhaustive", False))
    trace_diameter = float(chget("trace_diameter", DEFAULT_TRACE_DIAMETER))
    chdone()

    contact_log = None
    trajectory = None
    onsets = False
    if contacts_tbl is not None:
        ctget, ctdone = _take(dict(contacts_tbl), "contacts")
        log_path = ctget("log", None)
        traj_tbl = ctget("trajectory", None)
        onsets = bool(ctget("onsets", False))
        ctdone()
        if log_path is not None:
            contact_log = base / log_path
        if traj_tbl is not None:
            tget, tdone = _take(dict(traj_tbl), "contacts.trajectory")
            trajectory = SweepTrajectory(
                radius=float(tget("radius", 0.02)),
                waypoints=np.asarray(tget("waypoints", None), dtype=np.float64),
                step=float(tget("step", 0.005)))
            tdone()

    oget, odone = _take(dict(output_tbl), "output")
    directory = base / oget("directory", "out")
    odone()

    return PipelineConfig(
        mesh_path=mesh_path, name=str(name),
        scale=mesh_scale if scale is None else float(scale),
        weld_tolerance=weld_tol,
        skin=_parse_map_source(skin_tbl, "skin", base),
        density=_parse_map_source(density_tbl, "density", base),
        cutoff_tolerance=cutoff, resample_ratio=ratio,
        thickness=thickness, clearance=clearance,
        sampling=sampling, heuristic=heuristic, filament=filament,
        chain_start=chain_start, chain_exhaustive=chain_exhaustive,
        trace_diameter=trace_diameter,
        contact_log=contact_log, trajectory=trajectory, contact_onsets=onsets,
        out_dir=Path(out_dir) if out_dir is not None else directory,
        seed=int(run_seed) if seed is None else int(seed),
        allow_broken=bool(allow_broken) if allow_broken is not None else False)


def _check_paths(config: PipelineConfig) -> None:
    missing = [p for p in (config.mesh_path, config.skin.sidecar,
                           config.density.sidecar, config.contact_log)
               if p is not None and not Path(p).is_file()]
    if missing:
        raise ConfigError("missing input files: "
                          + ", ".join(str(p) for p in missing))


def build_manifest(name: str, mesh: TriMesh, layout: NoduleLayout,
                   design: ChainDesign, parameters: dict,
                   artifacts: dict | None = None) -> dict:
    """Machine-readable description of the generated skin unit."""
    table = expected_rc_table(design)
    cum_by_id = {nid: float(design.cumulative_resistances[k])
                 for k, nid in enumerate(design.order)}

    def finite(x: float):
        return float(x) if math.isfinite(x) else None

    nodules = [{
        "id": n.id,
        "position": [float(c) for c in n.position],
        "normal": [float(c) for c in n.normal],
        "radius": float(n.radius),
        "cumulative_resistance": cum_by_id[n.id],
    } for n in layout.nodules]
    return {
        "name": name,
        "tool_version": TOOL_VERSION,
        "mesh_checksum": mesh.checksum,
        "layout_checksum": layout.checksum,
        "nodules": nodules,
        "chain": {
            "order": list(design.order),
            "segment_resistances": [float(r) for r in design.segment_resistances],
            "total_resistance": design.total_resistance,
        },
        "calibration": [{
            "nodule_id": e.nodule_id,
            "expected_delay": e.expected_delay,
            "band_low": finite(e.band_low),
            "band_high": finite(e.band_high),
        } for e in table.entries],
        "parameters": parameters,
        "artifacts": artifacts or {},
    }


def serialize_manifest(manifest: dict) -> str:
    """Stable byte encoding: sorted keys, fixed indent, repr floats."""
    return json.dumps(manifest, sort_keys=True, indent=2,
                      ensure_ascii=True) + "\n"


def _file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunResult:
    config: PipelineConfig
    mesh: TriMesh
    shell: SkinShell
    layout: NoduleLayout
    design: ChainDesign
    density: HeatMap
    manifest: dict
    manifest_text: str
    report: dict
    outputs: dict[str, Path]


def _parameters_dict(config: PipelineConfig) -> dict:
    fil = config.filament_spec
    return {
        "cutoff_tolerance": config.cutoff_tolerance,
        "resample_ratio": config.resample_ratio,
        "thickness": config.thickness,
        "clearance": config.clearance,
        "scale": config.scale,
        "seed": config.seed,
        "sampling": {
            "minimum_distribution_distance":
                config.sampling.minimum_distribution_distance,
            "fill_tolerance": config.sampling.fill_tolerance,
            "radius_factor": config.sampling.radius_factor,
            "max_samples": config.sampling.max_samples,
        },
        "filament": {
            "resistivity": fil.resistivity,
            "min_nodule_spacing": fil.min_nodule_spacing,
            "margin": fil.margin,
        },
        "chain": {
            "start": config.chain_start,
            "exhaustive": config.chain_exhaustive,
            "trace_diameter": config.trace_diameter,
        },
    }


def generate_unit(mesh: TriMesh, skin: HeatMap, density: HeatMap,
                  config: PipelineConfig) -> tuple[SkinShell, NoduleLayout,
                                                   SubMesh, int]:
    """Cutout, shell, and sampled layout for already-built heat maps.

    Returns the shell, the radius-assigned layout, the (snapped) cutout,
    and the number of self-intersecting face pairs found on the shell.
    """
    with _stage("skin-cutout"):
        sub = extract_cutout(mesh, skin, config.cutoff_tolerance)
        if sub.n_components > 1:
            raise GeometryError(
                f"cutout splits into {sub.n_components} disconnected patches; "
                "adjust the skin map or cutoff_tolerance")
        sub, splines = smooth_cutout(sub, config.resample_ratio)
        shell = extrude(sub, config.thickness, config.clearance,
                        tuple(splines))
        hits = detect_self_intersections(shell)
        if hits and not config.allow_broken:
            raise GeometryError(
                f"shell self-intersects ({len(hits)} face pairs); reduce "
                "thickness or open up the cutout")

    with _stage("nodule-sampling"):
        layout = assign_radii(sample_nodules(shell, density, config.sampling))
    return shell, layout, sub, len(hits)


def design_chain(shell: SkinShell, layout: NoduleLayout,
                 config: PipelineConfig) -> ChainDesign:
    """Chain-design stage: order, resistances, routed traces."""
    with _stage("chain-design"):
        start = config.chain_start
        if start not in {n.id for n in layout.nodules}:
            start = layout.nodules[0].id
        order = order_chain(layout, start=start,
                            exhaustive=config.chain_exhaustive)
        design = assign_resistances(order, layout, config.filament_spec)
        return route_traces(shell, design, config.trace_diameter)


def manifest_for(config: PipelineConfig, mesh: TriMesh, layout: NoduleLayout,
                 design: ChainDesign, body_bytes: bytes,
                 cond_bytes: bytes) -> dict:
    """Manifest with artifact hashes; shared by the CLI and the service."""
    artifacts = {
        "body_stl_sha256": hashlib.sha256(body_bytes).hexdigest(),
        "conductive_stl_sha256": hashlib.sha256(cond_bytes).hexdigest(),
    }
    return build_manifest(config.name, mesh, layout, design,
                          _parameters_dict(config), artifacts)


def run_pipeline(config: PipelineConfig) -> RunResult:
    """Execute every stage and write the artifact set to the output dir."""
    _check_paths(config)
    with _stage("mesh-load"):
        mesh = load_mesh(config.mesh_path, weld_tol=config.weld_tolerance,
                         scale=config.scale)
        validate_mesh(mesh, weld_tol=config.weld_tolerance)

    with _stage("heatmap"):
        skin = config.skin.build(mesh, "skin")
        density = config.density.build(mesh, "density")

    shell, layout, sub, self_hits = generate_unit(mesh, skin, density, config)

    optimized_density: HeatMap | None = None
    if config.has_contacts:
        with _stage("contact-optimization"):
            if config.trajectory is not None:
                events = simulate_contacts(shell, layout, config.trajectory)
                hist = histogram_from_events(events, layout,
                                             onsets=config.contact_onsets)
            else:
                hist = ingest_contact_log(config.contact_log, layout,
                                          onsets=config.contact_onsets)
            params = config.heuristic.resolved(layout)
            optimized_density = optimize_heatmap(mesh, layout, hist, params)
            layout = assign_radii(
                sample_nodules(shell, optimized_density, config.sampling))

    design = design_chain(shell, layout, config)

    with _stage("export"):
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        body = shell.mesh
        conductive = conductive_bodies(shell, layout, design,
                                       config.trace_diameter)
        body_bytes = stl_bytes(body)
        cond_bytes = stl_bytes(conductive)
        outputs: dict[str, Path] = {
            "body_stl": out / f"{config.name}_body.stl",
            "conductive_stl": out / f"{config.name}_conductive.stl",
            "manifest": out / f"{config.name}_manifest.json",
            "report": out / f"{config.name}_report.json",
        }
        outputs["body_stl"].write_bytes(body_bytes)
        outputs["conductive_stl"].write_bytes(cond_bytes)
        if optimized_density is not None:
            outputs["density_sidecar"] = out / f"{config.name}_density_optimized.weights"
            save_heatmap(optimized_density, outputs["density_sidecar"])

        manifest = manifest_for(config, mesh, layout, design,
                                body_bytes, cond_bytes)
        manifest_text = serialize_manifest(manifest)
        outputs["manifest"].write_text(manifest_text, encoding="ascii")

        report = {
            "name": config.name,
            "nodule_count": len(layout),
            "shell_volume_cm3": shell.volume * 1e6,
            "conductive_volume_cm3": signed_volume(conductive) * 1e6,
            "total_resistance_kohm": design.total_resistance,
            "self_intersection_pairs": self_hits,
            "watertight": is_watertight(body),
            "optimized": optimized_density is not None,
            "trace_segments": len(design.trace_polylines),
            "outputs": {k: str(v) for k, v in outputs.items()},
        }
        outputs["report"].write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n",
            encoding="ascii")

    return RunResult(config=config, mesh=mesh, shell=shell, layout=layout,
                     design=design,
                     density=optimized_density if optimized_density is not None
                     else density,
                     manifest=manifest, manifest_text=manifest_text,
                     report=report, outputs=outputs)


@dataclass(frozen=True)
class Characterization:
    name: str
    nodule_count: int
    volume_cm3: float
    total_resistance_kohm: float
    average_radius_mm: float

    def as_dict(self) -> dict:
        return asdict(self)

    def text(self) -> str:
        return ("unit | nodules | volume (cm^3) | total R (kOhm) | "
                "avg radius (mm)\n"
                f"{self.name} | {self.nodule_count} | {self.volume_cm3:.2f} | "
                f"{self.total_resistance_kohm:.1f} | "
                f"{self.average_radius_mm:.2f}")


def characterize(manifest: dict, body: TriMesh,
                 body_path: Path | None = None) -> Characterization:
    """Sensor characterization row: counts, volume, resistance, radius.

    When the body file path is given, its hash must match the manifest so
    a mutated or mismatched mesh cannot masquerade as the generated one.
    """
    if body_path is not None:
        recorded = manifest.get("artifacts", {}).get("body_stl_sha256")
        if recorded and recorded != _file_sha256(Path(body_path)):
            raise ConfigError(
                "body mesh does not match the manifest checksum")
    radii = [n["radius"] for n in manifest["nodules"]]
    return Characterization(
        name=manifest["name"],
        nodule_count=len(manifest["nodules"]),
        volume_cm3=abs(signed_volume(body)) * 1e6,
        total_resistance_kohm=float(manifest["chain"]["total_resistance"]),
        average_radius_mm=float(np.mean(radii) * 1000) if radii else 0.0)
