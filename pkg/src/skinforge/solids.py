"""Closed solids for the conductive print body.

Nodules become through-thickness discs, traces become swept tubes. The
solids overlap each other and the shell on purpose: multi-material slicers
take overlapping bodies, and boolean subtraction buys nothing but fragility
here.
"""

from __future__ import annotations

import numpy as np

from .errors import GeometryError
from .mesh import TriMesh, concatenate

TUBE_SEGMENTS = 12


def _ring_frame(tangent: np.ndarray, prev_u: np.ndarray | None) -> np.ndarray:
    """Transport the ring axis u along the polyline to avoid twist."""
    t = tangent / np.linalg.norm(tangent)
    if prev_u is None:
        seed = np.zeros(3)
        seed[int(np.argmin(np.abs(t)))] = 1.0
        u = np.cross(t, seed)
    else:
        u = prev_u - t * (prev_u @ t)
        if np.linalg.norm(u) < 1e-12:
            seed = np.zeros(3)
            seed[int(np.argmin(np.abs(t)))] = 1.0
            u = np.cross(t, seed)
    return u / np.linalg.norm(u)


def tube_along(polyline: np.ndarray, radius: float,
               segments: int = TUBE_SEGMENTS) -> TriMesh:
    """Capped tube swept along a polyline. Watertight."""
    poly = np.asarray(polyline, dtype=np.float64)
    if poly.ndim != 2 or poly.shape[1] != 3 or len(poly) < 2:
        raise GeometryError("tube needs a polyline of at least 2 xyz points")
    if radius <= 0 or segments < 3:
        raise GeometryError("tube needs positive radius and >= 3 segments")

    # Per-point tangents: segment directions, averaged at interior joints.
    seg_dir = np.diff(poly, axis=0)
    lens = np.linalg.norm(seg_dir, axis=1)
    if (lens == 0).any():
        raise GeometryError("tube polyline has a zero-length segment")
    seg_dir = seg_dir / lens[:, None]
    tangents = np.empty_like(poly)
    tangents[0] = seg_dir[0]
    tangents[-1] = seg_dir[-1]
    for i in range(1, len(poly) - 1):
        avg = seg_dir[i - 1] + seg_dir[i]
        if np.linalg.norm(avg) < 1e-12:
            avg = seg_dir[i]  # hairpin: keep the incoming direction
        tangents[i] = avg / np.linalg.norm(avg)

    theta = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    verts: list[np.ndarray] = []
    u = None
    for p, t in zip(poly, tangents):
        u = _ring_frame(t, u)
        v = np.cross(t / np.linalg.norm(t), u)
        ring = p + radius * (np.outer(np.cos(theta), u) + np.outer(np.sin(theta), v))
        verts.append(ring)
    n_rings = len(poly)
    vertices = np.concatenate(verts + [poly[0][None, :], poly[-1][None, :]])
    c0 = n_rings * segments
    c1 = c0 + 1

    faces = []
    for k in range(n_rings - 1):
        a = k * segments
        b = (k + 1) * segments
        for i in range(segments):
            j = (i + 1) % segments
            faces.append((a + i, a + j, b + j))
            faces.append((a + i, b + j, b + i))
    for i in range(segments):
        j = (i + 1) % segments
        faces.append((c0, j, i))  # start cap faces backwards along the path
        base = (n_rings - 1) * segments
        faces.append((c1, base + i, base + j))
    return TriMesh(vertices=vertices, faces=np.array(faces, dtype=np.int64))


def cylinder_between(p0: np.ndarray, p1: np.ndarray, radius: float,
                     segments: int = TUBE_SEGMENTS) -> TriMesh:
    return tube_along(np.array([p0, p1], dtype=np.float64), radius, segments)


def nodule_bodies(shell, layout, segments: int = TUBE_SEGMENTS) -> list[TriMesh]:
    """Through-thickness disc per nodule, spanning inner to outer surface.

    Discs follow the nodule's own surface normal, so near the cutout rim
    they can protrude marginally past the offset surfaces; the overlap is
    harmless for printing.
    """
    bodies = []
    for nod in layout.nodules:
        if nod.radius is None:
            raise GeometryError(f"nodule {nod.id} has no radius assigned")
        # positions sit on the outer (contact) surface
        inner = nod.position - shell.thickness * nod.normal
        bodies.append(cylinder_between(inner, nod.position, nod.radius, segments))
    return bodies


def trace_bodies(design, trace_diameter: float,
                 segments: int = TUBE_SEGMENTS) -> list[TriMesh]:
    if len(design.order) > 1 and not design.trace_polylines:
        raise GeometryError("chain design has no routed traces yet")
    return [tube_along(poly, trace_diameter / 2, segments)
            for poly in design.trace_polylines]


def conductive_bodies(shell, layout, design,
                      trace_diameter: float) -> TriMesh:
    """All conductive solids merged into one (overlapping) mesh."""
    return concatenate(nodule_bodies(shell, layout)
                       + trace_bodies(design, trace_diameter))
