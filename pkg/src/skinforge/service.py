"""Local HTTP surface for the painter UI, versioned under /v1.

Sessions are in-memory: each holds a mesh, its two heat maps, and the last
generated shell/layout/design. Mutating requests on one session are
serialized; a busy session answers 409 instead of queueing, so the UI never
silently loses a write. The manifest endpoint returns exactly the bytes the
CLI writes to disk for the same inputs.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from pydantic import BaseModel

from .chain import ChainDesign, FilamentSpec
from .contacts import (ContactHistogram, HeuristicParams, SweepTrajectory,
                       histogram_from_events, optimize_heatmap,
                       parse_contact_log, simulate_contacts)
from .cutout import SkinShell, SubMesh
from .errors import (ChainDesignError, ConfigError, GeometryError,
                     SkinforgeError)
from .heatmap import HeatMap, BrushStroke, apply_brush, dump_sidecar, parse_sidecar, uniform_map
from .mesh import TriMesh, load_mesh, stl_bytes, validate_mesh
from .pipeline import (PipelineConfig, design_chain, generate_unit,
                       manifest_for, serialize_manifest)
from .sampler import NoduleLayout, SamplingParams, assign_radii, sample_nodules
from .solids import conductive_bodies

ROLES = ("skin", "density")


@dataclass
class Session:
    id: str
    name: str
    mesh: TriMesh
    scale: float
    maps: dict[str, HeatMap]
    versions: dict[str, int] = field(default_factory=lambda: {"skin": 0,
                                                              "density": 0})
    lock: threading.Lock = field(default_factory=threading.Lock)
    shell: SkinShell | None = None
    sub: SubMesh | None = None
    layout: NoduleLayout | None = None
    design: ChainDesign | None = None
    config: PipelineConfig | None = None
    manifest_text: str | None = None


class SessionSource(BaseModel):
    path: str | None = None
    vertices: list[list[float]] | None = None
    faces: list[list[int]] | None = None


class CreateSession(BaseModel):
    name: str = "session"
    scale: float = 1.0
    source: SessionSource


class BrushBody(BaseModel):
    role: Literal["skin", "density"]
    shape: Literal["sphere", "box"] = "sphere"
    center: tuple[float, float, float]
    extent: float | tuple[float, float, float]
    strength: float
    falloff: Literal["constant", "linear", "smooth"] = "smooth"


class SamplingBody(BaseModel):
    minimum_distribution_distance: float = 0.06
    fill_tolerance: float = 0.15
    radius_factor: float = 0.25
    max_samples: int = 256


class FilamentBody(BaseModel):
    resistivity: float = 256.0
    min_nodule_spacing: float = 0.06
    margin: float = 20.0


class ChainBody(BaseModel):
    start: int = 0
    exhaustive: bool = False
    trace_diameter: float = 0.0015


class GenerateBody(BaseModel):
    cutoff_tolerance: float = 0.5
    resample_ratio: float = 0.5
    thickness: float = 0.003
    clearance: float = 0.0
    seed: int = 0
    allow_broken: bool = False
    sampling: SamplingBody = SamplingBody()
    filament: FilamentBody | None = None
    chain: ChainBody = ChainBody()


class TrajectoryBody(BaseModel):
    radius: float
    step: float
    waypoints: list[list[float]]


class OptimizeBody(BaseModel):
    counts: dict[int, int] | None = None
    log_text: str | None = None
    trajectory: TrajectoryBody | None = None
    alpha: float | None = None
    filter_order: int = 2
    normalize_counts: bool = True
    onsets: bool = False


def _nodule_json(layout: NoduleLayout, design: ChainDesign) -> list[dict]:
    cum = {nid: float(design.cumulative_resistances[k])
           for k, nid in enumerate(design.order)}
    return [{
        "id": n.id,
        "position": [float(c) for c in n.position],
        "normal": [float(c) for c in n.normal],
        "radius": float(n.radius),
        "cumulative_resistance": cum[n.id],
    } for n in layout.nodules]


def create_app(asset_root: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="skinforge", version="1")
    sessions: dict[str, Session] = {}
    root = Path(asset_root).resolve() if asset_root is not None else None

    def get_session(sid: str) -> Session:
        try:
            return sessions[sid]
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {sid}") from None

    def hold(session: Session):
        if not session.lock.acquire(blocking=False):
            raise HTTPException(status_code=409,
                                detail="session busy with another request")
        return session.lock

    @app.exception_handler(ConfigError)
    async def _config_error(_: Request, exc: ConfigError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(GeometryError)
    async def _geometry_error(_: Request, exc: GeometryError):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(ChainDesignError)
    async def _chain_error(_: Request, exc: ChainDesignError):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/v1/sessions")
    def create_session(body: CreateSession):
        src = body.source
        if src.path is not None:
            if root is None:
                raise ConfigError("service started without an asset root")
            target = (root / src.path).resolve()
            if not target.is_relative_to(root):
                raise ConfigError("asset path escapes the asset root")
            mesh = load_mesh(target, scale=body.scale)
        elif src.vertices is not None and src.faces is not None:
            mesh = TriMesh(
                vertices=np.asarray(src.vertices, dtype=np.float64) * body.scale,
                faces=np.asarray(src.faces, dtype=np.int64))
        else:
            raise ConfigError("session source needs a path or vertices+faces")
        validate_mesh(mesh)
        sid = uuid.uuid4().hex
        sessions[sid] = Session(
            id=sid, name=body.name, mesh=mesh, scale=body.scale,
            maps={"skin": uniform_map(mesh, 1.0, "skin"),
                  "density": uniform_map(mesh, 1.0, "density")})
        return {"session_id": sid,
                "mesh": {"n_vertices": mesh.n_vertices,
                         "n_faces": mesh.n_faces,
                         "checksum": mesh.checksum}}

    @app.get("/v1/sessions/{sid}")
    def session_status(sid: str):
        s = get_session(sid)
        return {"session_id": s.id, "name": s.name,
                "versions": dict(s.versions),
                "mesh_checksum": s.mesh.checksum,
                "generated": s.shell is not None,
                "nodule_count": len(s.layout) if s.layout else 0}

    @app.get("/v1/sessions/{sid}/mesh")
    def get_mesh(sid: str):
        s = get_session(sid)
        return {"vertices": s.mesh.vertices.tolist(),
                "faces": s.mesh.faces.tolist(),
                "checksum": s.mesh.checksum}

    @app.get("/v1/sessions/{sid}/heatmap/{role}")
    def get_heatmap(sid: str, role: str):
        s = get_session(sid)
        if role not in ROLES:
            raise ConfigError(f"unknown heat-map role {role!r}")
        return PlainTextResponse(dump_sidecar(s.maps[role]))

    @app.put("/v1/sessions/{sid}/heatmap/{role}")
    async def put_heatmap(sid: str, role: str, request: Request):
        s = get_session(sid)
        if role not in ROLES:
            raise ConfigError(f"unknown heat-map role {role!r}")
        text = (await request.body()).decode("utf-8", errors="replace")
        lock = hold(s)
        try:
            s.maps[role] = parse_sidecar(text, s.mesh, role)
            s.versions[role] += 1
            return {"version": s.versions[role]}
        finally:
            lock.release()

    @app.post("/v1/sessions/{sid}/brush")
    def post_brush(sid: str, body: BrushBody):
        s = get_session(sid)
        stroke = BrushStroke(shape=body.shape, center=body.center,
                             extent=body.extent, strength=body.strength,
                             falloff=body.falloff)
        lock = hold(s)
        try:
            before = s.maps[body.role]
            after = apply_brush(before, stroke)
            changed = np.flatnonzero(after.weights != before.weights)
            s.maps[body.role] = after
            s.versions[body.role] += 1
            return {"version": s.versions[body.role],
                    "updates": [[int(i), float(after.weights[i])]
                                for i in changed]}
        finally:
            lock.release()

    @app.post("/v1/sessions/{sid}/generate")
    def post_generate(sid: str, body: GenerateBody):
        s = get_session(sid)
        lock = hold(s)
        try:
            filament = None
            if body.filament is not None:
                filament = FilamentSpec(
                    resistivity=body.filament.resistivity,
                    min_nodule_spacing=body.filament.min_nodule_spacing,
                    margin=body.filament.margin)
            config = PipelineConfig(
                mesh_path=Path(s.name), name=s.name, scale=s.scale,
                cutoff_tolerance=body.cutoff_tolerance,
                resample_ratio=body.resample_ratio,
                thickness=body.thickness, clearance=body.clearance,
                sampling=SamplingParams(
                    minimum_distribution_distance=
                        body.sampling.minimum_distribution_distance,
                    fill_tolerance=body.sampling.fill_tolerance,
                    radius_factor=body.sampling.radius_factor,
                    max_samples=body.sampling.max_samples),
                filament=filament,
                chain_start=body.chain.start,
                chain_exhaustive=body.chain.exhaustive,
                trace_diameter=body.chain.trace_diameter,
                seed=body.seed, allow_broken=body.allow_broken)
            shell, layout, sub, hits = generate_unit(
                s.mesh, s.maps["skin"], s.maps["density"], config)
            design = design_chain(shell, layout, config)
            conductive = conductive_bodies(shell, layout, design,
                                           config.trace_diameter)
            manifest = manifest_for(config, s.mesh, layout, design,
                                    stl_bytes(shell.mesh),
                                    stl_bytes(conductive))
            s.shell, s.sub, s.layout, s.design = shell, sub, layout, design
            s.config = config
            s.manifest_text = serialize_manifest(manifest)
            return {
                "shell": {"vertices": shell.mesh.vertices.tolist(),
                          "faces": shell.mesh.faces.tolist()},
                "nodules": _nodule_json(layout, design),
                "traces": [p.tolist() for p in design.trace_polylines],
                "self_intersections": hits,
                "volume_cm3": shell.volume * 1e6,
            }
        finally:
            lock.release()

    @app.post("/v1/sessions/{sid}/optimize")
    def post_optimize(sid: str, body: OptimizeBody):
        s = get_session(sid)
        if s.layout is None or s.shell is None or s.config is None:
            raise HTTPException(status_code=409,
                                detail="generate before optimizing")
        lock = hold(s)
        try:
            layout = s.layout
            if body.counts is not None:
                hist = ContactHistogram(counts=dict(body.counts), layout=layout)
            elif body.log_text is not None:
                events = parse_contact_log(body.log_text, layout)
                hist = histogram_from_events(events, layout, onsets=body.onsets)
            elif body.trajectory is not None:
                traj = SweepTrajectory(
                    radius=body.trajectory.radius,
                    waypoints=np.asarray(body.trajectory.waypoints),
                    step=body.trajectory.step)
                events = simulate_contacts(s.shell, layout, traj)
                hist = histogram_from_events(events, layout, onsets=body.onsets)
            else:
                raise ConfigError(
                    "optimize needs counts, log_text, or a trajectory")
            params = HeuristicParams(
                alpha=body.alpha, filter_order=body.filter_order,
                normalize_counts=body.normalize_counts).resolved(layout)
            density = optimize_heatmap(s.mesh, layout, hist, params)
            new_layout = assign_radii(
                sample_nodules(s.shell, density, s.config.sampling))
            design = design_chain(s.shell, new_layout, s.config)
            conductive = conductive_bodies(s.shell, new_layout, design,
                                           s.config.trace_diameter)
            manifest = manifest_for(s.config, s.mesh, new_layout, design,
                                    stl_bytes(s.shell.mesh),
                                    stl_bytes(conductive))
            before = len(layout)
            s.maps["density"] = density
            s.versions["density"] += 1
            s.layout, s.design = new_layout, design
            s.manifest_text = serialize_manifest(manifest)
            return {
                "density_version": s.versions["density"],
                "nodules": _nodule_json(new_layout, design),
                "traces": [p.tolist() for p in design.trace_polylines],
                "nodules_before": before,
                "nodules_after": len(new_layout),
            }
        finally:
            lock.release()

    @app.get("/v1/sessions/{sid}/manifest")
    def get_manifest(sid: str):
        s = get_session(sid)
        if s.manifest_text is None:
            raise HTTPException(status_code=409,
                                detail="generate before fetching a manifest")
        return Response(content=s.manifest_text, media_type="application/json")

    return app


def serve(port: int = 8765, asset_root: str | Path | None = None,
          host: str = "127.0.0.1") -> None:
    """Run the service until interrupted (development server)."""
    import uvicorn

    uvicorn.run(create_app(asset_root), host=host, port=port)
