"""Skin-map cutout, boundary smoothing, and shell extrusion.

The chain is: threshold the skin heat map into a base cutout, trace its
boundary loops, smooth each loop with a closed Catmull-Rom spline, then
extrude the cutout outward along vertex normals into a printable solid
shell of uniform thickness.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import GeometryError
from .heatmap import HeatMap
from .mesh import TriMesh
from .spline import BoundarySpline, smooth_boundary


@dataclass(frozen=True)
class SubMesh:
    """Faces selected from a parent mesh, reindexed over used vertices.

    `vertex_map[i]` is the parent vertex id of local vertex i. `vertices`
    start as copies of the parent positions; boundary smoothing replaces
    them with snapped positions.
    """

    parent: TriMesh
    face_indices: np.ndarray  # (k,) parent face ids
    vertices: np.ndarray      # (v, 3) local positions
    faces: np.ndarray         # (k, 3) local indices
    vertex_map: np.ndarray    # (v,) parent vertex ids
    component_labels: np.ndarray  # (k,) component id per face

    @property
    def n_components(self) -> int:
        return int(self.component_labels.max()) + 1 if len(self.component_labels) else 0

    @cached_property
    def edge_counts(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0, return_counts=True)

    def is_edge_manifold(self) -> bool:
        _, counts = self.edge_counts
        return bool((counts <= 2).all())

    def with_vertices(self, new_vertices: np.ndarray) -> "SubMesh":
        return replace(self, vertices=np.asarray(new_vertices, dtype=np.float64))

    def split_components(self) -> list["SubMesh"]:
        """One SubMesh per edge-connected component (sorted by id)."""
        out = []
        for c in range(self.n_components):
            mask = self.component_labels == c
            out.append(_build_submesh(
                self.parent, self.face_indices[mask],
                vertex_positions=self.vertices, vertex_map=self.vertex_map))
        return out


def _build_submesh(
    mesh: TriMesh,
    face_indices: np.ndarray,
    vertex_positions: np.ndarray | None = None,
    vertex_map: np.ndarray | None = None,
) -> SubMesh:
    faces_parent = mesh.faces[face_indices]
    used = np.unique(faces_parent)
    local_of_parent = np.full(mesh.n_vertices, -1, dtype=np.int64)
    local_of_parent[used] = np.arange(len(used))
    local_faces = local_of_parent[faces_parent]
    if vertex_positions is None:
        positions = mesh.vertices[used].copy()
    else:
        # carry over (possibly snapped) positions from an existing submesh
        old_local = np.full(mesh.n_vertices, -1, dtype=np.int64)
        old_local[vertex_map] = np.arange(len(vertex_map))
        positions = vertex_positions[old_local[used]].copy()
    labels = _component_labels(local_faces, len(used))
    return SubMesh(
        parent=mesh,
        face_indices=np.asarray(face_indices, dtype=np.int64),
        vertices=positions,
        faces=local_faces,
        vertex_map=used,
        component_labels=labels,
    )


def _component_labels(faces: np.ndarray, n_vertices: int) -> np.ndarray:
    """Label edge-connected face components with a union-find over edges."""
    parent = list(range(len(faces)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    edge_owner: dict[tuple[int, int], int] = {}
    for fi, (a, b, c) in enumerate(faces):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            if key in edge_owner:
                union(edge_owner[key], fi)
            else:
                edge_owner[key] = fi
    roots = {}
    labels = np.empty(len(faces), dtype=np.int64)
    for fi in range(len(faces)):
        r = find(fi)
        if r not in roots:
            roots[r] = len(roots)
        labels[fi] = roots[r]
    return labels


def extract_cutout(mesh: TriMesh, skin_map: HeatMap, cutoff_tolerance: float) -> SubMesh:
    """Select faces whose three vertex weights all exceed the cutoff.

    The all-vertices rule is conservative: no selected face protrudes past
    the painted region. Components are labeled for per-shell processing.
    """
    if skin_map.mesh_checksum != mesh.checksum:
        raise GeometryError("skin map does not belong to this mesh")
    if not 0.0 <= cutoff_tolerance <= 1.0:
        raise GeometryError(f"cutoff tolerance {cutoff_tolerance} outside [0, 1]")
    w = skin_map.weights[mesh.faces]
    selected = np.flatnonzero((w > cutoff_tolerance).all(axis=1))
    if len(selected) == 0:
        raise GeometryError("cutout empty at this tolerance")
    return _build_submesh(mesh, selected)


def boundary_loops(sub: SubMesh) -> list[np.ndarray]:
    """Ordered closed boundary loops (local vertex ids), longest first.

    A boundary edge has exactly one incident selected face; loops follow
    the face winding. Raises on non-manifold edges (3+ incident faces).
    """
    uniq, counts = sub.edge_counts
    if (counts > 2).any():
        bad = uniq[np.argmax(counts > 2)]
        raise GeometryError(
            f"non-manifold edge ({bad[0]}, {bad[1]}) with {counts.max()} faces")
    boundary = {tuple(e) for e in uniq[counts == 1]}

    # directed boundary edges, taking the direction used by the owning face
    nxt: dict[int, list[int]] = {}
    for a, b, c in sub.faces:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            if key in boundary:
                nxt.setdefault(int(u), []).append(int(v))
    for targets in nxt.values():
        targets.sort()

    loops: list[np.ndarray] = []
    seen: set[tuple[int, int]] = set()
    for start in sorted(nxt):
        for first in nxt[start]:
            if (start, first) in seen:
                continue
            loop = [start]
            u, v = start, first
            while True:
                seen.add((u, v))
                if v == start:
                    break
                loop.append(v)
                candidates = [t for t in nxt.get(v, []) if (v, t) not in seen]
                if not candidates:
                    raise GeometryError(
                        f"boundary walk stuck at vertex {v}; cutout is not edge-manifold")
                u, v = v, candidates[0]
            loops.append(np.asarray(loop, dtype=np.int64))

    def length(loop: np.ndarray) -> float:
        pts = sub.vertices[loop]
        return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())

    loops.sort(key=length, reverse=True)
    return loops


def smooth_cutout(sub: SubMesh, resample_ratio: float) -> tuple[SubMesh, list[BoundarySpline]]:
    """Smooth every boundary loop and snap its vertices onto the spline."""
    new_vertices = sub.vertices.copy()
    splines = []
    for loop in boundary_loops(sub):
        spline, snapped = smooth_boundary(sub.vertices[loop], resample_ratio)
        new_vertices[loop] = snapped
        splines.append(spline)
    return sub.with_vertices(new_vertices), splines


@dataclass(frozen=True)
class SkinShell:
    """Extruded solid shell: inner surface on the robot, outer offset out.

    The shell mesh stacks the inner vertices first, then the outer copies,
    so `outer_offset + i` is the outer twin of local vertex i. Outer faces
    keep their mapping to parent faces for density-map queries.
    """

    mesh: TriMesh
    sub: SubMesh
    thickness: float
    clearance: float
    outer_offset: int            # shell vertex id offset of the outer copy
    outer_faces: np.ndarray      # (k, 3) shell vertex ids of outer surface
    outer_face_parent: np.ndarray  # (k,) parent face ids
    wall_midlines: tuple[np.ndarray, ...]  # per loop, (p, 3) mid-thickness
    splines: tuple[BoundarySpline, ...] = ()

    @cached_property
    def volume(self) -> float:
        """Signed volume (m^3); positive for an outward-oriented shell."""
        v = self.mesh.vertices
        f = self.mesh.faces
        return float(np.einsum(
            "ij,ij->", v[f[:, 0]], np.cross(v[f[:, 1]], v[f[:, 2]])) / 6.0)

    @cached_property
    def outer_areas(self) -> np.ndarray:
        v = self.mesh.vertices
        f = self.outer_faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        return 0.5 * np.linalg.norm(cross, axis=1)

    @cached_property
    def outer_normals(self) -> np.ndarray:
        v = self.mesh.vertices
        f = self.outer_faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        n = np.linalg.norm(cross, axis=1)
        return cross / np.where(n > 0, n, 1.0)[:, None]

    def outer_surface(self) -> tuple[TriMesh, np.ndarray]:
        """Outer (contact-side) surface as its own mesh.

        Returns the reindexed mesh plus the parent vertex id of each of
        its vertices, so parent-mesh heat maps transfer one-to-one.
        """
        n_sub = len(self.sub.vertices)
        verts = self.mesh.vertices[self.outer_offset:self.outer_offset + n_sub]
        faces = self.outer_faces - self.outer_offset
        return TriMesh(verts.copy(), faces.copy()), self.sub.vertex_map.copy()


def extrude(
    sub: SubMesh,
    thickness: float,
    clearance: float = 0.0,
    splines: tuple[BoundarySpline, ...] = (),
) -> SkinShell:
    """Extrude the cutout outward along parent vertex normals.

    The inner surface sits on the robot (optionally lifted by `clearance`
    for print fit); the outer surface is offset by `thickness` along the
    parent's area-weighted vertex normals; boundary loops become stitched
    quad-strip walls. The result is watertight for manifold cutouts with
    disc or annulus topology.
    """
    if thickness <= 0:
        raise GeometryError(f"shell thickness must be positive, got {thickness}")
    if clearance < 0:
        raise GeometryError(f"clearance must be nonnegative, got {clearance}")
    if not sub.is_edge_manifold():
        raise GeometryError("cannot extrude a non-manifold cutout")

    normals = sub.parent.vertex_normals[sub.vertex_map]
    inner = sub.vertices + clearance * normals
    outer = inner + thickness * normals
    n_local = len(sub.vertices)

    shell_vertices = np.vstack([inner, outer])
    inner_faces = sub.faces[:, ::-1]              # flipped: normals face the robot
    outer_faces = sub.faces + n_local

    loops = boundary_loops(sub)
    wall_faces = []
    midlines = []
    for loop in loops:
        a = loop
        b = np.roll(loop, -1)
        # wall quads (a_in, b_in, b_out) + (a_in, b_out, a_out), wound outward
        wall_faces.append(np.column_stack([a, b, b + n_local]))
        wall_faces.append(np.column_stack([a, b + n_local, a + n_local]))
        midlines.append(0.5 * (inner[loop] + outer[loop]))

    all_faces = [inner_faces, outer_faces] + wall_faces
    shell = TriMesh(vertices=shell_vertices, faces=np.vstack(all_faces))
    return SkinShell(
        mesh=shell,
        sub=sub,
        thickness=float(thickness),
        clearance=float(clearance),
        outer_offset=n_local,
        outer_faces=outer_faces,
        outer_face_parent=sub.face_indices,
        wall_midlines=tuple(midlines),
        splines=tuple(splines),
    )
