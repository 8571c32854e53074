"""Parametric meshes used by tests, demos, and the service fixtures."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def _grid_mesh(xs: np.ndarray, ys: np.ndarray, zfunc, flip=None) -> TriMesh:
    """Structured grid surface z = f(x, y), wound for +z-ish normals.

    flip(i) selects the other quad diagonal for cell column i; mirrored
    shapes need mirrored diagonals or vertex normals on the symmetry line
    pick up a spurious tilt from the lopsided triangle fans.
    """
    nx, ny = len(xs), len(ys)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = zfunc(gx, gy)
    vertices = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def vid(i: int, j: int) -> int:
        return i * ny + j

    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            if flip is not None and flip(i):
                faces.append((a, b, d))
                faces.append((b, c, d))
            else:
                faces.append((a, b, c))
                faces.append((a, c, d))
    return TriMesh(vertices=vertices, faces=np.array(faces, dtype=np.int64))


def flat_plate(size: float = 0.1, divisions: int = 10) -> TriMesh:
    """Square plate in the xy plane, centered on the origin, normals +z."""
    xs = np.linspace(-size / 2, size / 2, divisions + 1)
    return _grid_mesh(xs, xs, lambda x, y: np.zeros_like(x))


def v_groove(half_width: float = 0.01, length: float = 0.06,
             bands: int = 6, rings: int = 2) -> TriMesh:
    """Valley with walls z = sqrt(3)|x|, normals facing into the groove.

    Offsetting along the vertex normals folds the walls through each other
    once the offset exceeds roughly half_width/sqrt(3) (for rings=2), which
    makes this the standard broken-shell fixture.
    """
    side = np.linspace(0.0, half_width, rings + 1)
    xs = np.concatenate([-side[::-1], side[1:]])
    ys = np.linspace(0.0, length, bands + 1)
    return _grid_mesh(xs, ys, lambda x, y: np.sqrt(3.0) * np.abs(x),
                      flip=lambda i: xs[i] >= 0.0)


def cylinder_patch(radius: float = 0.05, height: float = 0.12,
                   sweep: float = np.pi, nu: int = 24, nv: int = 12) -> TriMesh:
    """Open cylindrical sheet (axis z), outward normals."""
    thetas = np.linspace(-sweep / 2, sweep / 2, nu + 1)
    zs = np.linspace(-height / 2, height / 2, nv + 1)
    gt, gz = np.meshgrid(thetas, zs, indexing="ij")
    vertices = np.column_stack([radius * np.cos(gt.ravel()),
                                radius * np.sin(gt.ravel()),
                                gz.ravel()])

    def vid(i: int, j: int) -> int:
        return i * (nv + 1) + j

    faces = []
    for i in range(nu):
        for j in range(nv):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return TriMesh(vertices=vertices, faces=np.array(faces, dtype=np.int64))


_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array([
    (-1, _ICO_T, 0), (1, _ICO_T, 0), (-1, -_ICO_T, 0), (1, -_ICO_T, 0),
    (0, -1, _ICO_T), (0, 1, _ICO_T), (0, -1, -_ICO_T), (0, 1, -_ICO_T),
    (_ICO_T, 0, -1), (_ICO_T, 0, 1), (-_ICO_T, 0, -1), (-_ICO_T, 0, 1),
], dtype=np.float64)
_ICO_FACES = np.array([
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
], dtype=np.int64)


def icosphere(radius: float = 0.05, subdivisions: int = 2) -> TriMesh:
    """Closed sphere from a subdivided icosahedron, outward normals."""
    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]
    midpoint_cache: dict[tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in midpoint_cache:
            m = verts[a] + verts[b]
            verts.append(m / np.linalg.norm(m))
            midpoint_cache[key] = len(verts) - 1
        return midpoint_cache[key]

    for _ in range(subdivisions):
        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces
    return TriMesh(vertices=np.array(verts) * radius,
                   faces=np.array(faces, dtype=np.int64))
