"""Triangle-mesh ingestion, validation, and differential quantities.

Every downstream stage consumes a :class:`TriMesh`: an immutable indexed
triangle mesh in meters with derived per-vertex normals and edge adjacency.
Loaders weld duplicate vertices (robot CAD exports routinely duplicate
vertices per face) and drop degenerate faces so that connectivity-dependent
stages can rely on a clean mesh.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GeometryError

log = logging.getLogger(__name__)

# Faces with less area than this (m^2) are considered degenerate.
DEGENERATE_AREA = 1e-12

# Default weld tolerance (m) for merging duplicate vertices on load.
DEFAULT_WELD_TOL = 1e-6


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh of a robot link (vertices in meters).

    Immutable after construction; derived quantities are cached lazily and
    the arrays are marked read-only, so instances are safe to share across
    parallel workers.
    """

    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray     # (m, 3) int64

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        faces = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise GeometryError(f"vertices must be (n, 3), got {verts.shape}")
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise GeometryError(f"faces must be (m, 3), got {faces.shape}")
        if len(verts) == 0:
            raise GeometryError("mesh has no vertices")
        if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
            raise GeometryError(
                f"face index out of range (vertex count {len(verts)})")
        verts.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def face_cross(self) -> np.ndarray:
        """Unnormalized face normals (cross products, magnitude 2x area)."""
        v0 = self.vertices[self.faces[:, 0]]
        v1 = self.vertices[self.faces[:, 1]]
        v2 = self.vertices[self.faces[:, 2]]
        return np.cross(v1 - v0, v2 - v0)

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        cross = self.face_cross
        norms = np.linalg.norm(cross, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        out = cross / safe[:, None]
        out.setflags(write=False)
        return out

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted per-vertex unit normals.

        Summing the raw cross products weights each incident face by its
        area. Raises for isolated vertices (no incident face).
        """
        acc = np.zeros((self.n_vertices, 3))
        for k in range(3):
            np.add.at(acc, self.faces[:, k], self.face_cross)
        norms = np.linalg.norm(acc, axis=1)
        incident = np.zeros(self.n_vertices, dtype=bool)
        incident[self.faces.ravel()] = True
        if not incident.all():
            bad = int(np.flatnonzero(~incident)[0])
            raise GeometryError(f"isolated vertex {bad} has no incident face")
        if (norms < 1e-30).any():
            bad = int(np.flatnonzero(norms < 1e-30)[0])
            raise GeometryError(
                f"vertex {bad} has a zero area-weighted normal")
        out = acc / norms[:, None]
        out.setflags(write=False)
        return out

    @cached_property
    def edges_unique(self) -> tuple[np.ndarray, np.ndarray]:
        """Undirected unique edges and their incident-face counts."""
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    @cached_property
    def checksum(self) -> str:
        """SHA-256 over a canonical little-endian byte serialization."""
        h = hashlib.sha256()
        h.update(b"v")
        h.update(self.vertices.astype("<f8").tobytes())
        h.update(b"f")
        h.update(self.faces.astype("<i8").tobytes())
        return h.hexdigest()

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class MeshReport:
    """Validation summary; all counts are nonnegative."""

    is_manifold: bool
    boundary_edge_count: int
    duplicate_vertex_count: int
    degenerate_face_count: int

    def as_dict(self) -> dict:
        return {
            "is_manifold": self.is_manifold,
            "boundary_edge_count": self.boundary_edge_count,
            "duplicate_vertex_count": self.duplicate_vertex_count,
            "degenerate_face_count": self.degenerate_face_count,
        }


@dataclass
class LoadStats:
    """Counters accumulated while parsing and normalizing a mesh file."""

    welded_vertices: int = 0
    fan_triangulated: int = 0
    dropped_degenerate: int = 0


def validate_mesh(mesh: TriMesh, weld_tol: float = DEFAULT_WELD_TOL) -> MeshReport:
    """Compute a :class:`MeshReport`; the mesh is never modified."""
    uniq, counts = mesh.edges_unique
    boundary = int((counts == 1).sum())
    manifold = bool(((counts == 1) | (counts == 2)).all()) if len(uniq) else True

    keys = np.round(mesh.vertices / weld_tol).astype(np.int64)
    n_unique = len(np.unique(keys, axis=0))
    duplicates = mesh.n_vertices - n_unique

    repeated = (
        (mesh.faces[:, 0] == mesh.faces[:, 1])
        | (mesh.faces[:, 1] == mesh.faces[:, 2])
        | (mesh.faces[:, 2] == mesh.faces[:, 0])
    )
    degenerate = int((repeated | (mesh.face_areas < DEGENERATE_AREA)).sum())

    return MeshReport(
        is_manifold=manifold,
        boundary_edge_count=boundary,
        duplicate_vertex_count=int(duplicates),
        degenerate_face_count=degenerate,
    )


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted per-vertex unit normals (see TriMesh.vertex_normals)."""
    return mesh.vertex_normals


# ---------------------------------------------------------------------------
# welding / construction helpers
# ---------------------------------------------------------------------------

def weld_vertices(
    vertices: np.ndarray,
    faces: np.ndarray,
    tol: float = DEFAULT_WELD_TOL,
    stats: LoadStats | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Merge vertices that coincide within `tol` and remap faces.

    Quantizes coordinates to a tol-sized grid; exact duplicates always merge,
    near-duplicates merge unless they straddle a grid boundary. Degenerate
    faces produced by the merge are dropped. Winding is preserved.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    keys = np.round(vertices / tol).astype(np.int64)
    _, first, inverse = np.unique(
        keys, axis=0, return_index=True, return_inverse=True)
    # Keep first-occurrence order so welding is stable under file order.
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    new_index = rank[inverse]
    new_vertices = vertices[first[order]]
    new_faces = new_index[faces]

    welded = len(vertices) - len(new_vertices)
    keep = _nondegenerate_mask(new_vertices, new_faces)
    dropped = int((~keep).sum())
    if stats is not None:
        stats.welded_vertices += welded
        stats.dropped_degenerate += dropped
    return new_vertices, new_faces[keep]


def _nondegenerate_mask(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    if len(faces) == 0:
        return np.zeros(0, dtype=bool)
    distinct = (
        (faces[:, 0] != faces[:, 1])
        & (faces[:, 1] != faces[:, 2])
        & (faces[:, 2] != faces[:, 0])
    )
    v0 = vertices[faces[:, 0]]
    cross = np.cross(vertices[faces[:, 1]] - v0, vertices[faces[:, 2]] - v0)
    area = 0.5 * np.linalg.norm(cross, axis=1)
    return distinct & (area >= DEGENERATE_AREA)


def _fan_triangulate(indices: list[int], stats: LoadStats) -> list[tuple[int, int, int]]:
    if len(indices) == 3:
        return [tuple(indices)]
    stats.fan_triangulated += 1
    return [(indices[0], indices[k], indices[k + 1])
            for k in range(1, len(indices) - 1)]


# ---------------------------------------------------------------------------
# readers
# ---------------------------------------------------------------------------

def load_mesh(
    path: str | Path,
    fmt: str | None = None,
    weld_tol: float = DEFAULT_WELD_TOL,
    scale: float = 1.0,
) -> TriMesh:
    """Load an OBJ, STL (binary or ASCII), or ASCII PLY file.

    Parameters
    ----------
    path : file to read; format inferred from the extension unless `fmt`
        is one of "obj", "stl", "ply".
    weld_tol : vertex weld tolerance in meters.
    scale : uniform scale applied on load (STL files carry no units).

    Raises GeometryError on parse failure or an empty mesh.
    """
    path = Path(path)
    if not path.exists():
        raise GeometryError(f"mesh file not found: {path}")
    if fmt is None:
        fmt = path.suffix.lower().lstrip(".")
    fmt = fmt.lower()
    stats = LoadStats()
    if fmt == "obj":
        vertices, faces = _parse_obj(path, stats)
    elif fmt == "stl":
        vertices, faces = _parse_stl(path)
    elif fmt == "ply":
        vertices, faces = _parse_ply(path, stats)
    else:
        raise GeometryError(f"unsupported mesh format: {fmt!r}")
    if len(vertices) == 0 or len(faces) == 0:
        raise GeometryError(f"empty mesh in {path}")
    if scale != 1.0:
        vertices = vertices * float(scale)
    vertices, faces = weld_vertices(vertices, faces, tol=weld_tol, stats=stats)
    if len(faces) == 0:
        raise GeometryError(f"no valid faces left after welding {path}")
    if stats.fan_triangulated or stats.dropped_degenerate:
        log.warning(
            "%s: fan-triangulated %d polygons, dropped %d degenerate faces",
            path.name, stats.fan_triangulated, stats.dropped_degenerate)
    return TriMesh(vertices=vertices, faces=faces)


def _parse_obj(path: Path, stats: LoadStats) -> tuple[np.ndarray, np.ndarray]:
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError as e:
        raise GeometryError(f"cannot read {path}: {e}") from e
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise GeometryError(f"{path}:{lineno}: malformed vertex line")
            verts.append([float(p) for p in parts[1:4]])
        elif tag == "f":
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                if not head:
                    raise GeometryError(f"{path}:{lineno}: malformed face token {token!r}")
                i = int(head)
                # OBJ indices are 1-based; negatives are relative to the end.
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise GeometryError(f"{path}:{lineno}: face with fewer than 3 vertices")
            faces.extend(_fan_triangulate(idx, stats))
    return np.asarray(verts, dtype=np.float64).reshape(-1, 3), \
        np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def _parse_stl(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = path.read_bytes()
    if len(data) == 0:
        raise GeometryError(f"cannot parse {path}: empty file")
    if len(data) >= 84:
        (n_tri,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * n_tri and n_tri > 0:
            return _parse_stl_binary(data, n_tri)
    text = data.decode("utf-8", errors="replace")
    if "facet" in text and "vertex" in text:
        return _parse_stl_ascii(text, path)
    raise GeometryError(f"cannot parse {path}: not a valid STL file")


def _parse_stl_binary(data: bytes, n_tri: int) -> tuple[np.ndarray, np.ndarray]:
    records = np.frombuffer(data, dtype=np.uint8, count=50 * n_tri, offset=84)
    records = records.reshape(n_tri, 50)
    floats = records[:, :48].copy().view("<f4").reshape(n_tri, 12)
    tris = floats[:, 3:12].astype(np.float64).reshape(n_tri, 3, 3)
    vertices = tris.reshape(-1, 3)
    faces = np.arange(3 * n_tri, dtype=np.int64).reshape(-1, 3)
    return vertices, faces


def _parse_stl_ascii(text: str, path: Path) -> tuple[np.ndarray, np.ndarray]:
    coords: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("vertex"):
            parts = line.split()
            if len(parts) < 4:
                raise GeometryError(f"{path}:{lineno}: malformed vertex line")
            coords.append([float(p) for p in parts[1:4]])
    if len(coords) % 3 != 0:
        raise GeometryError(f"{path}: vertex count not a multiple of 3")
    vertices = np.asarray(coords, dtype=np.float64)
    faces = np.arange(len(vertices), dtype=np.int64).reshape(-1, 3)
    return vertices, faces


def _parse_ply(path: Path, stats: LoadStats) -> tuple[np.ndarray, np.ndarray]:
    lines = path.read_text(encoding="utf-8", errors="replace").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise GeometryError(f"cannot parse {path}: missing ply magic")
    n_vert = n_face = 0
    vertex_props: list[str] = []
    current = None
    i = 1
    while i < len(lines):
        parts = lines[i].split()
        i += 1
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise GeometryError(f"{path}: only ASCII PLY is supported")
        elif parts[0] == "element":
            current = parts[1]
            if current == "vertex":
                n_vert = int(parts[2])
            elif current == "face":
                n_face = int(parts[2])
        elif parts[0] == "property" and current == "vertex" and parts[1] != "list":
            vertex_props.append(parts[-1])
        elif parts[0] == "end_header":
            break
    else:
        raise GeometryError(f"{path}: missing end_header")

    try:
        ix, iy, iz = (vertex_props.index(a) for a in ("x", "y", "z"))
    except ValueError as e:
        raise GeometryError(f"{path}: vertex element lacks x/y/z") from e

    body = [ln.split() for ln in lines[i:] if ln.strip()]
    if len(body) < n_vert + n_face:
        raise GeometryError(f"{path}: truncated PLY body")
    verts = np.array(
        [[float(row[ix]), float(row[iy]), float(row[iz])] for row in body[:n_vert]],
        dtype=np.float64,
    ).reshape(-1, 3)
    faces: list[tuple[int, int, int]] = []
    for row in body[n_vert:n_vert + n_face]:
        k = int(row[0])
        idx = [int(t) for t in row[1:1 + k]]
        if k < 3:
            raise GeometryError(f"{path}: face with fewer than 3 vertices")
        faces.extend(_fan_triangulate(idx, stats))
    return verts, np.asarray(faces, dtype=np.int64).reshape(-1, 3)


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------

def save_obj(mesh: TriMesh, path: str | Path) -> None:
    """Write positions and faces only (exact float round-trip via repr)."""
    path = Path(path)
    out = []
    for v in mesh.vertices:
        out.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in mesh.faces:
        out.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def stl_bytes(mesh: TriMesh, header: str = "skinforge") -> bytes:
    """Binary STL encoding: 80-byte header, uint32 count, 50-byte records.

    Deterministic for identical meshes, so artifact hashes are stable.
    """
    n = mesh.n_faces
    buf = bytearray()
    buf += header.encode("ascii", errors="replace")[:80].ljust(80, b"\0")
    buf += struct.pack("<I", n)
    normals = mesh.face_normals.astype("<f4")
    tris = mesh.vertices[mesh.faces].astype("<f4")
    for k in range(n):
        buf += normals[k].tobytes()
        buf += tris[k].tobytes()
        buf += b"\0\0"
    return bytes(buf)


def save_stl(mesh: TriMesh, path: str | Path, header: str = "skinforge") -> None:
    Path(path).write_bytes(stl_bytes(mesh, header))


def concatenate(meshes: list[TriMesh]) -> TriMesh:
    """Concatenate meshes into one (no welding; bodies may overlap)."""
    if not meshes:
        raise GeometryError("nothing to concatenate")
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return TriMesh(vertices=np.vstack(verts), faces=np.vstack(faces))


def signed_volume(mesh: TriMesh) -> float:
    """Divergence-theorem volume; meaningful for closed, outward meshes."""
    tris = mesh.vertices[mesh.faces]
    return float(np.einsum("ij,ij->", tris[:, 0],
                           np.cross(tris[:, 1], tris[:, 2])) / 6.0)


def is_watertight(mesh: TriMesh) -> bool:
    """Every undirected edge shared by exactly two faces."""
    _, counts = mesh.edges_unique
    return bool((counts == 2).all())
