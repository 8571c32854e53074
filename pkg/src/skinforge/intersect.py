"""Exact triangle-triangle intersection tests for printability checks.

Offsetting a concave cutout can fold the shell through itself, which breaks
printing. `detect_self_intersections` runs an interval-based tri-tri test
over all non-adjacent face pairs, pruned by a uniform spatial hash; an empty
result means the shell is printable.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .mesh import TriMesh

# Geometric tolerance (m) for on-plane classification.
EPS = 1e-12


def _project_2d(points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    axis = int(np.argmax(np.abs(normal)))
    keep = [i for i in range(3) if i != axis]
    return points[..., keep]


def _orient2d(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _point_in_tri_2d(p, tri) -> bool:
    d0 = _orient2d(tri[0], tri[1], p)
    d1 = _orient2d(tri[1], tri[2], p)
    d2 = _orient2d(tri[2], tri[0], p)
    has_neg = (d0 < 0) or (d1 < 0) or (d2 < 0)
    has_pos = (d0 > 0) or (d1 > 0) or (d2 > 0)
    return not (has_neg and has_pos)


def _segments_intersect_2d(p1, p2, q1, q2) -> bool:
    d1 = _orient2d(q1, q2, p1)
    d2 = _orient2d(q1, q2, p2)
    d3 = _orient2d(p1, p2, q1)
    d4 = _orient2d(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != d2 and d3 != d4:
        return True

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    if d1 == 0 and on_seg(q1, q2, p1):
        return True
    if d2 == 0 and on_seg(q1, q2, p2):
        return True
    if d3 == 0 and on_seg(p1, p2, q1):
        return True
    if d4 == 0 and on_seg(p1, p2, q2):
        return True
    return False


def _coplanar_tri_tri(n: np.ndarray, t1: np.ndarray, t2: np.ndarray) -> bool:
    a = _project_2d(t1, n)
    b = _project_2d(t2, n)
    for i in range(3):
        for j in range(3):
            if _segments_intersect_2d(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]):
                return True
    return _point_in_tri_2d(a[0], b) or _point_in_tri_2d(b[0], a)


def _interval(proj: np.ndarray, dist: np.ndarray) -> tuple[float, float] | None:
    """Projection interval of the plane-crossing segment (Moller style)."""
    d0, d1, d2 = dist
    if d0 * d1 > 0:
        lone = 2
    elif d0 * d2 > 0:
        lone = 1
    elif d1 * d2 > 0 or d0 != 0:
        lone = 0
    elif d1 != 0:
        lone = 1
    elif d2 != 0:
        lone = 2
    else:
        return None  # fully on-plane; caller handles coplanarity
    other = [k for k in range(3) if k != lone]
    da = dist[lone]
    pa = proj[lone]
    ends = []
    for b in other:
        db, pb = dist[b], proj[b]
        ends.append(pa + (pb - pa) * (da / (da - db)))
    return (min(ends), max(ends))


def tri_tri_intersect(t1: np.ndarray, t2: np.ndarray, eps: float = EPS) -> bool:
    """True if the two 3D triangles intersect (touching counts)."""
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)

    n2 = np.cross(t2[1] - t2[0], t2[2] - t2[0])
    norm2 = np.linalg.norm(n2)
    n1 = np.cross(t1[1] - t1[0], t1[2] - t1[0])
    norm1 = np.linalg.norm(n1)
    if norm1 == 0 or norm2 == 0:
        return False  # degenerate triangle: nothing meaningful to report

    dv = (t1 - t2[0]) @ (n2 / norm2)
    dv[np.abs(dv) < eps] = 0.0
    if (dv > 0).all() or (dv < 0).all():
        return False

    du = (t2 - t1[0]) @ (n1 / norm1)
    du[np.abs(du) < eps] = 0.0
    if (du > 0).all() or (du < 0).all():
        return False

    if (dv == 0).all() and (du == 0).all():
        return _coplanar_tri_tri(n1, t1, t2)

    d = np.cross(n1, n2)
    axis = int(np.argmax(np.abs(d)))
    iv = _interval(t1[:, axis], dv)
    iu = _interval(t2[:, axis], du)
    if iv is None or iu is None:
        return _coplanar_tri_tri(n1, t1, t2)
    return max(iv[0], iu[0]) <= min(iv[1], iu[1])


def _candidate_pairs(tris: np.ndarray) -> set[tuple[int, int]]:
    """Pairs whose AABBs share a spatial-hash cell."""
    lo = tris.min(axis=1)
    hi = tris.max(axis=1)
    extents = (hi - lo).max(axis=1)
    cell = float(extents.max())
    if cell <= 0:
        cell = 1.0
    cells: dict[tuple[int, int, int], list[int]] = {}
    lo_idx = np.floor(lo / cell).astype(np.int64)
    hi_idx = np.floor(hi / cell).astype(np.int64)
    for t in range(len(tris)):
        for ix in range(lo_idx[t, 0], hi_idx[t, 0] + 1):
            for iy in range(lo_idx[t, 1], hi_idx[t, 1] + 1):
                for iz in range(lo_idx[t, 2], hi_idx[t, 2] + 1):
                    cells.setdefault((ix, iy, iz), []).append(t)
    pairs: set[tuple[int, int]] = set()
    for bucket in cells.values():
        if len(bucket) > 1:
            pairs.update(combinations(bucket, 2))
    return pairs


def intersecting_face_pairs(mesh: TriMesh, eps: float = EPS) -> list[tuple[int, int]]:
    """All intersecting non-adjacent face pairs (spatial-hash pruned).

    Pairs sharing a vertex index are skipped: adjacent faces always touch
    along their shared simplex and carry no printability signal.
    """
    tris = mesh.vertices[mesh.faces]
    faces = mesh.faces
    lo = tris.min(axis=1)
    hi = tris.max(axis=1)
    hits = []
    for i, j in _candidate_pairs(tris):
        if (lo[i] > hi[j]).any() or (lo[j] > hi[i]).any():
            continue
        if set(faces[i]) & set(faces[j]):
            continue
        if tri_tri_intersect(tris[i], tris[j], eps=eps):
            hits.append((min(i, j), max(i, j)))
    return sorted(set(hits))


def detect_self_intersections(shell, eps: float = EPS) -> list[tuple[int, int]]:
    """Intersecting triangle pairs of a shell; empty list means printable."""
    mesh = shell.mesh if hasattr(shell, "mesh") else shell
    return intersecting_face_pairs(mesh, eps=eps)
