"""Per-vertex weight maps: the skin coverage map and the sensor density map.

A map assigns each vertex a normalized weight in [0, 1]. Weights are painted
with additive/subtractive brushes or set directly; the sampler and cutout
stages query them per vertex or at barycentric points. Maps are value types:
every operation returns a new map.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mesh import TriMesh

ROLES = ("skin", "density")
FALLOFFS = ("constant", "linear", "smooth")
SHAPES = ("sphere", "box")


@dataclass(frozen=True)
class HeatMap:
    """Normalized per-vertex weights bound to a mesh by checksum."""

    mesh: TriMesh
    weights: np.ndarray  # (n,) float64 in [0, 1]
    role: str = "skin"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(w) != self.mesh.n_vertices:
            raise ConfigError(
                f"weight count {len(w)} != vertex count {self.mesh.n_vertices}")
        if self.role not in ROLES:
            raise ConfigError(f"unknown heat-map role {self.role!r}")
        if (w < 0).any() or (w > 1).any():
            raise ConfigError("weights must lie in [0, 1]")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def mesh_checksum(self) -> str:
        return self.mesh.checksum


def uniform_map(mesh: TriMesh, value: float, role: str) -> HeatMap:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"uniform weight {value} outside [0, 1]")
    return HeatMap(mesh=mesh, weights=np.full(mesh.n_vertices, float(value)), role=role)


@dataclass(frozen=True)
class BrushStroke:
    """A single additive or subtractive paint stroke in 3D.

    `extent` is the sphere radius, or per-axis half-extents for a box.
    `strength` is signed: positive adds weight, negative subtracts.
    """

    shape: str          # "sphere" | "box"
    center: tuple[float, float, float]
    extent: float | tuple[float, float, float]
    strength: float
    falloff: str = "smooth"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown brush shape {self.shape!r}")
        if self.falloff not in FALLOFFS:
            raise ConfigError(f"unknown falloff {self.falloff!r}")
        ext = np.asarray(self.extent, dtype=np.float64).reshape(-1)
        if (ext <= 0).any():
            raise ConfigError("brush extent must be positive")
        if self.shape == "box" and len(ext) not in (1, 3):
            raise ConfigError("box brush needs 1 or 3 half-extents")


def _falloff(kind: str, t: np.ndarray) -> np.ndarray:
    # t is the normalized distance in [0, 1]; all falloffs are 1 at center.
    if kind == "constant":
        return np.ones_like(t)
    if kind == "linear":
        return 1.0 - t
    # cubic smoothstep, reversed so weight fades to 0 at the brush edge
    return 1.0 - (3.0 * t * t - 2.0 * t * t * t)


def apply_brush(hmap: HeatMap, stroke: BrushStroke) -> HeatMap:
    """Apply one stroke: weight <- clamp(weight + strength * falloff, 0, 1).

    Distances are Euclidean 3D (matching the visual brushing metaphor);
    vertices outside the brush shape are untouched.
    """
    verts = hmap.mesh.vertices
    center = np.asarray(stroke.center, dtype=np.float64)
    d = verts - center
    if stroke.shape == "sphere":
        radius = float(np.asarray(stroke.extent).reshape(-1)[0])
        dist = np.linalg.norm(d, axis=1)
        inside = dist <= radius
        t = np.clip(dist / radius, 0.0, 1.0)
    else:
        half = np.asarray(stroke.extent, dtype=np.float64).reshape(-1)
        if len(half) == 1:
            half = np.repeat(half, 3)
        q = np.abs(d) / half
        inside = (q <= 1.0).all(axis=1)
        t = np.clip(q.max(axis=1), 0.0, 1.0)
    if not inside.any():
        return hmap
    w = hmap.weights.copy()
    w[inside] = np.clip(
        w[inside] + stroke.strength * _falloff(stroke.falloff, t[inside]), 0.0, 1.0)
    return replace(hmap, weights=w)


def set_weights(hmap: HeatMap, explicit: list[tuple[int, float]]) -> HeatMap:
    """Overwrite listed vertices; later entries win on repeats."""
    w = hmap.weights.copy()
    n = len(w)
    for index, value in explicit:
        if not 0 <= index < n:
            raise ConfigError(f"vertex index {index} out of range (n={n})")
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"weight {value} for vertex {index} outside [0, 1]")
        w[index] = float(value)
    return replace(hmap, weights=w)


def weight_at_point(hmap: HeatMap, face: int, barycentric) -> float:
    """Barycentric interpolation of the three corner weights of `face`."""
    bary = np.asarray(barycentric, dtype=np.float64).reshape(-1)
    if len(bary) != 3:
        raise ConfigError("barycentric coordinates must have 3 components")
    if (bary < -1e-12).any():
        raise ConfigError(f"barycentric coordinates must be nonnegative: {bary}")
    if abs(bary.sum() - 1.0) > 1e-9:
        raise ConfigError(f"barycentric coordinates must sum to 1: {bary}")
    if not 0 <= face < hmap.mesh.n_faces:
        raise ConfigError(f"face index {face} out of range")
    corners = hmap.mesh.faces[face]
    return float(hmap.weights[corners] @ bary)


# ---------------------------------------------------------------------------
# sidecar persistence
# ---------------------------------------------------------------------------
# Text format shared by the CLI and the HTTP painter backend:
#   # mesh_sha256:<hex> role:<skin|density> n:<count>
#   <index> <weight>
# one line per vertex; weights are repr'd for exact round-trips.

def dump_sidecar(hmap: HeatMap) -> str:
    lines = [f"# mesh_sha256:{hmap.mesh_checksum} role:{hmap.role} n:{len(hmap.weights)}"]
    for i, w in enumerate(hmap.weights):
        lines.append(f"{i} {float(w)!r}")
    return "\n".join(lines) + "\n"


def save_heatmap(hmap: HeatMap, path: str | Path) -> None:
    Path(path).write_text(dump_sidecar(hmap), encoding="utf-8")


def parse_sidecar(text: str, mesh: TriMesh, role: str | None = None) -> HeatMap:
    """Parse sidecar text; the mesh checksum in the header must match."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ConfigError("heat-map sidecar missing header line")
    header = dict(
        token.split(":", 1) for token in lines[0].lstrip("# ").split() if ":" in token)
    for key in ("mesh_sha256", "role", "n"):
        if key not in header:
            raise ConfigError(f"heat-map sidecar header missing {key!r}")
    if header["mesh_sha256"] != mesh.checksum:
        raise ConfigError(
            "heat-map sidecar checksum mismatch: sidecar was written for "
            f"mesh {header['mesh_sha256'][:12]}..., got {mesh.checksum[:12]}...")
    if int(header["n"]) != mesh.n_vertices:
        raise ConfigError(
            f"sidecar vertex count {header['n']} != mesh {mesh.n_vertices}")
    file_role = header["role"]
    if file_role not in ROLES:
        raise ConfigError(f"unknown sidecar role {file_role!r}")
    weights = np.zeros(mesh.n_vertices)
    for lineno, raw in enumerate(lines[1:], 2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"sidecar line {lineno}: expected 'index weight'")
        try:
            idx, value = int(parts[0]), float(parts[1])
        except ValueError as e:
            raise ConfigError(f"sidecar line {lineno}: {e}") from e
        if not 0 <= idx < mesh.n_vertices:
            raise ConfigError(f"sidecar line {lineno}: index {idx} out of range")
        weights[idx] = value
    return HeatMap(mesh=mesh, weights=weights, role=role or file_role)


def load_heatmap(path: str | Path, mesh: TriMesh, role: str | None = None) -> HeatMap:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"heat-map sidecar not found: {path}")
    return parse_sidecar(path.read_text(encoding="utf-8"), mesh, role=role)
