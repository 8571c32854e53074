"""Density-weighted blue-noise placement of sensing nodules on a mesh.

Dart throwing with a per-candidate exclusion distance: dense regions of the
density map shrink the local minimum distance, sparse regions grow it, and
weights below the fill tolerance exclude placement entirely. Accepted
samples are kept apart by each candidate's own exclusion distance, queried
through a uniform spatial hash.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, GeometryError
from .heatmap import HeatMap
from .mesh import TriMesh

# Weights below this floor no longer widen spacing; they saturate it.
WEIGHT_FLOOR = 0.05
# Minimum clearance (m) kept between assigned nodule outlines.
RADIUS_GAP = 0.0005
# Consecutive rejections per requested sample before declaring saturation.
REJECTION_FACTOR = 30


@dataclass(frozen=True)
class SamplingParams:
    minimum_distribution_distance: float = 0.06
    fill_tolerance: float = 0.15
    radius_factor: float = 0.25
    max_samples: int = 256
    seed: int = 0

    def __post_init__(self) -> None:
        if self.minimum_distribution_distance <= 0:
            raise ConfigError("minimum_distribution_distance must be positive")
        if not 0.0 <= self.fill_tolerance <= 1.0:
            raise ConfigError("fill_tolerance must lie in [0, 1]")
        if not 0.0 < self.radius_factor <= 1.0:
            raise ConfigError("radius_factor must lie in (0, 1]")
        if self.max_samples < 1:
            raise ConfigError("max_samples must be at least 1")


def local_min_distance(weight: float, params: SamplingParams) -> float:
    """Exclusion distance at a point of the density map.

    Returns +inf below the fill tolerance: such points cannot host a nodule.
    """
    if weight < params.fill_tolerance:
        return float("inf")
    return params.minimum_distribution_distance / max(weight, WEIGHT_FLOOR)


@dataclass(frozen=True)
class Nodule:
    id: int
    face: int
    bary: np.ndarray
    position: np.ndarray
    normal: np.ndarray
    weight: float
    local_min_distance: float
    radius: float | None = None

    def __post_init__(self) -> None:
        for name in ("bary", "position", "normal"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class NoduleLayout:
    mesh: TriMesh
    nodules: tuple[Nodule, ...]
    params: SamplingParams
    mesh_checksum: str = field(default="")

    def __post_init__(self) -> None:
        if not self.mesh_checksum:
            object.__setattr__(self, "mesh_checksum", self.mesh.checksum)

    def __len__(self) -> int:
        return len(self.nodules)

    @property
    def checksum(self) -> str:
        """Identifies the placement (mesh plus nodule ids and positions).

        Radii are excluded so the id survives radius assignment.
        """
        h = hashlib.sha256()
        h.update(self.mesh_checksum.encode("ascii"))
        h.update(np.array([n.id for n in self.nodules], dtype="<i8").tobytes())
        if self.nodules:
            h.update(self.positions().astype("<f8").tobytes())
        return h.hexdigest()

    def positions(self) -> np.ndarray:
        return np.array([n.position for n in self.nodules], dtype=np.float64)

    def radii(self) -> np.ndarray:
        vals = [n.radius for n in self.nodules]
        if any(v is None for v in vals):
            raise GeometryError("layout has nodules without assigned radii")
        return np.array(vals, dtype=np.float64)

    @property
    def mean_local_min_distance(self) -> float:
        if not self.nodules:
            return self.params.minimum_distribution_distance
        return float(np.mean([n.local_min_distance for n in self.nodules]))


class _PointGrid:
    """Uniform hash over accepted points for radius queries."""

    def __init__(self, cell: float) -> None:
        self.cell = cell
        self.points: list[np.ndarray] = []
        self.buckets: dict[tuple[int, int, int], list[int]] = {}

    def _key(self, p: np.ndarray) -> tuple[int, int, int]:
        return tuple(np.floor(p / self.cell).astype(np.int64))

    def insert(self, p: np.ndarray) -> None:
        self.buckets.setdefault(self._key(p), []).append(len(self.points))
        self.points.append(p)

    def any_within(self, p: np.ndarray, radius: float) -> bool:
        if not self.points:
            return False
        reach = int(np.ceil(radius / self.cell))
        kx, ky, kz = self._key(p)
        r2 = radius * radius
        for ix in range(kx - reach, kx + reach + 1):
            for iy in range(ky - reach, ky + reach + 1):
                for iz in range(kz - reach, kz + reach + 1):
                    for idx in self.buckets.get((ix, iy, iz), ()):
                        d = self.points[idx] - p
                        if d @ d < r2:
                            return True
        return False


def sample_nodules(surface, density: HeatMap,
                   params: SamplingParams) -> NoduleLayout:
    """Throw darts at the surface until saturated or max_samples accepted.

    `surface` is either a bare TriMesh carrying its own density map, or a
    SkinShell: then darts land on the outer (contact-side) surface and the
    density map is transferred from the parent mesh by vertex.

    Faces are chosen area-uniformly; the candidate is rejected if any prior
    sample sits closer than the candidate's own local minimum distance.
    Deterministic for a fixed seed.
    """
    if hasattr(surface, "outer_surface"):
        mesh, parent_ids = surface.outer_surface()
        if density.mesh_checksum != surface.sub.parent.checksum:
            raise ConfigError("density map does not belong to the shell's parent mesh")
        density = HeatMap(mesh=mesh, weights=density.weights[parent_ids],
                          role=density.role)
    else:
        mesh = surface
    if density.mesh_checksum != mesh.checksum:
        raise ConfigError("density map does not belong to this mesh")
    if float(density.weights.max()) < params.fill_tolerance:
        raise GeometryError("density map empty above fill tolerance")

    rng = np.random.default_rng(params.seed)
    cdf = np.cumsum(mesh.face_areas)
    cdf /= cdf[-1]
    verts = mesh.vertices
    vnorms = mesh.vertex_normals
    weights = density.weights

    grid = _PointGrid(params.minimum_distribution_distance)
    accepted: list[Nodule] = []
    budget = REJECTION_FACTOR * params.max_samples
    misses = 0
    while len(accepted) < params.max_samples and misses < budget:
        u = rng.random(3)
        face = int(np.searchsorted(cdf, u[0], side="right"))
        face = min(face, len(mesh.faces) - 1)
        s = np.sqrt(u[1])
        bary = np.array([1.0 - s, s * (1.0 - u[2]), s * u[2]])
        corners = mesh.faces[face]
        w = float(bary @ weights[corners])
        lmd = local_min_distance(w, params)
        if not np.isfinite(lmd):
            misses += 1
            continue
        p = bary @ verts[corners]
        if grid.any_within(p, lmd):
            misses += 1
            continue
        n = bary @ vnorms[corners]
        n = n / np.linalg.norm(n)
        accepted.append(Nodule(id=len(accepted), face=face, bary=bary,
                               position=p, normal=n, weight=w,
                               local_min_distance=lmd))
        grid.insert(p)
        misses = 0

    if not accepted:
        raise GeometryError("density map empty above fill tolerance")
    return NoduleLayout(mesh=mesh, nodules=tuple(accepted), params=params)


def assign_radii(layout: NoduleLayout) -> NoduleLayout:
    """Size each nodule against its spacing budget and nearest neighbor.

    radius = min(radius_factor * local_min_distance,
                 half the nearest-neighbor distance minus a fixed gap)
    """
    pts = layout.positions()
    n = len(pts)
    nearest = np.full(n, np.inf)
    partner = np.full(n, -1, dtype=np.int64)
    if n > 1:
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        partner = dist.argmin(axis=1)
        nearest = dist[np.arange(n), partner]

    nodules = []
    for i, nod in enumerate(layout.nodules):
        r = layout.params.radius_factor * nod.local_min_distance
        if np.isfinite(nearest[i]):
            r = min(r, 0.5 * nearest[i] - RADIUS_GAP)
        if r <= 0:
            raise GeometryError(
                f"nodules {nod.id} and {layout.nodules[int(partner[i])].id} "
                "are too close to assign a positive radius")
        nodules.append(replace(nod, radius=float(r)))
    return replace(layout, nodules=tuple(nodules))
