"""Contact-driven regeneration of the density map.

Binary contact data (recorded logs or a synthetic sphere sweep) is reduced
to per-nodule hit counts, and each vertex weight becomes the max over
nodules of a Butterworth-style kernel

    sqrt( count_j / (1 + |d_ij / alpha| ** (2 * order)) )

so that heavily contacted regions stay dense and untouched regions decay
below the fill tolerance and lose their sensors on the next sampling pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .heatmap import HeatMap
from .mesh import TriMesh
from .sampler import NoduleLayout, sample_nodules

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContactEvent:
    nodule_id: int
    timestamp: float
    contact: bool


@dataclass(frozen=True)
class SweepTrajectory:
    """Sphere collider dragged along a waypoint polyline at unit speed."""

    radius: float
    waypoints: np.ndarray
    step: float

    def __post_init__(self) -> None:
        pts = np.asarray(self.waypoints, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise ConfigError("trajectory needs at least 2 waypoints of xyz")
        if self.radius <= 0 or self.step <= 0:
            raise ConfigError("trajectory radius and step must be positive")
        pts.setflags(write=False)
        object.__setattr__(self, "waypoints", pts)

    def sample_points(self) -> np.ndarray:
        """Path points at arc-length multiples of step, starting at 0."""
        seg = np.diff(self.waypoints, axis=0)
        lens = np.linalg.norm(seg, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        stations = np.arange(0.0, cum[-1] + 1e-12, self.step)
        out = np.empty((len(stations), 3))
        for k in range(3):
            out[:, k] = np.interp(stations, cum, self.waypoints[:, k])
        return out


@dataclass(frozen=True)
class HeuristicParams:
    """Kernel knobs: alpha is the cutoff distance, order the rolloff."""

    alpha: float | None = None
    filter_order: int = 2
    normalize_counts: bool = True

    def __post_init__(self) -> None:
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.filter_order < 1:
            raise ConfigError("filter_order must be at least 1")

    def resolved(self, layout: NoduleLayout) -> "HeuristicParams":
        """Fill alpha from the layout: twice the mean exclusion distance."""
        if self.alpha is not None:
            return self
        return replace(self, alpha=2.0 * layout.mean_local_min_distance)


@dataclass(frozen=True)
class ContactHistogram:
    counts: dict[int, int]
    layout: NoduleLayout

    def __post_init__(self) -> None:
        known = {n.id for n in self.layout.nodules}
        unknown = set(self.counts) - known
        if unknown:
            raise ConfigError(f"unknown nodule ids in contact data: {sorted(unknown)}")
        if any(c < 0 for c in self.counts.values()):
            raise ConfigError("contact counts must be nonnegative")
        full = {i: int(self.counts.get(i, 0)) for i in sorted(known)}
        object.__setattr__(self, "counts", full)

    @property
    def contacted_ids(self) -> list[int]:
        return [i for i, c in self.counts.items() if c > 0]

    @property
    def max_count(self) -> int:
        return max(self.counts.values(), default=0)


def histogram_from_events(events: list[ContactEvent], layout: NoduleLayout,
                          onsets: bool = False) -> ContactHistogram:
    """Count contact=1 events per nodule; onset mode counts rising edges."""
    counts: dict[int, int] = {}
    if onsets:
        state: dict[int, bool] = {}
        for ev in events:
            prev = state.get(ev.nodule_id, False)
            if ev.contact and not prev:
                counts[ev.nodule_id] = counts.get(ev.nodule_id, 0) + 1
            state[ev.nodule_id] = ev.contact
    else:
        for ev in events:
            if ev.contact:
                counts[ev.nodule_id] = counts.get(ev.nodule_id, 0) + 1
    return ContactHistogram(counts=counts, layout=layout)


LOG_HEADER = "# layout:"


def write_contact_log(path: str | Path, events: list[ContactEvent],
                      layout: NoduleLayout) -> None:
    lines = [f"{LOG_HEADER}{layout.checksum}"]
    for ev in events:
        lines.append(f"{float(ev.timestamp)!r} {ev.nodule_id} {int(ev.contact)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def parse_contact_log(text: str, layout: NoduleLayout) -> list[ContactEvent]:
    events: list[ContactEvent] = []
    known = {n.id for n in layout.nodules}
    saw_header = False
    last_t: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(LOG_HEADER):
                ref = line[len(LOG_HEADER):].strip()
                if ref != layout.checksum:
                    raise ConfigError(
                        f"contact log was recorded against layout {ref[:12]}, "
                        f"not {layout.checksum[:12]}")
                saw_header = True
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ConfigError(f"malformed contact record on line {lineno}: {raw!r}")
        try:
            t = float(parts[0])
            nid = int(parts[1])
            flag = int(parts[2])
        except ValueError as exc:
            raise ConfigError(
                f"malformed contact record on line {lineno}: {raw!r}") from exc
        if flag not in (0, 1):
            raise ConfigError(f"contact flag must be 0 or 1 on line {lineno}")
        if nid not in known:
            raise ConfigError(f"unknown nodule id {nid} on line {lineno}")
        if nid in last_t and t < last_t[nid]:
            raise ConfigError(f"timestamps go backwards on line {lineno}")
        last_t[nid] = t
        events.append(ContactEvent(nodule_id=nid, timestamp=t, contact=bool(flag)))
    if not saw_header:
        raise ConfigError("contact log is missing its layout header")
    return events


def ingest_contact_log(path: str | Path, layout: NoduleLayout,
                       onsets: bool = False) -> ContactHistogram:
    """Read a `timestamp nodule_id flag` log and tally contacts per nodule."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"contact log not found: {path}")
    events = parse_contact_log(path.read_text(encoding="ascii"), layout)
    return histogram_from_events(events, layout, onsets=onsets)


def simulate_contacts(shell, layout: NoduleLayout,
                      traj: SweepTrajectory) -> list[ContactEvent]:
    """Sweep a sphere along the trajectory and record per-step touches.

    A nodule is touched when the sphere center comes within
    (sphere radius + nodule radius) of its position. The log holds one
    contact=1 record per touched step plus a single release record, so
    both sample counting and onset counting reconstruct exactly.
    """
    del shell  # collision is against nodule positions, not shell geometry
    pts = traj.sample_points()
    centers = layout.positions()
    reach = traj.radius + layout.radii()
    events: list[ContactEvent] = []
    state = np.zeros(len(layout), dtype=bool)
    for i, p in enumerate(pts):
        t = i * traj.step
        dist = np.linalg.norm(centers - p, axis=1)
        now = dist <= reach
        for j in np.flatnonzero(now):
            events.append(ContactEvent(layout.nodules[j].id, t, True))
        for j in np.flatnonzero(state & ~now):
            events.append(ContactEvent(layout.nodules[j].id, t, False))
        state = now
    return events


def butterworth_weight(distance: float, normalized_count: float,
                       params: HeuristicParams) -> float:
    """Kernel value at a given distance from a contacted nodule."""
    if distance < 0:
        raise ConfigError("distance must be nonnegative")
    if params.alpha is None:
        raise ConfigError("alpha is unresolved; call params.resolved(layout)")
    ratio = abs(distance / params.alpha) ** (2 * params.filter_order)
    return float(np.sqrt(normalized_count / (1.0 + ratio)))


def optimize_heatmap(mesh: TriMesh, layout: NoduleLayout,
                     hist: ContactHistogram,
                     params: HeuristicParams) -> HeatMap:
    """Fold the contact kernel of every nodule into a fresh density map.

    Weights start at zero and take the per-vertex max over nodules.
    Counts are divided by the max count so the result stays in [0, 1];
    with normalization off, raw counts are used and the result is clamped.
    """
    params = params.resolved(layout)
    ids = list(hist.counts)
    counts = np.array([hist.counts[i] for i in ids], dtype=np.float64)
    weights = np.zeros(len(mesh.vertices))
    if hist.max_count == 0:
        log.warning("all contact counts are zero; density map is empty")
        return HeatMap(mesh=mesh, weights=weights, role="density")
    if params.normalize_counts:
        counts = counts / counts.max()

    positions = layout.positions()
    order = 2 * params.filter_order
    for j, nid in enumerate(ids):
        if counts[j] == 0:
            continue
        d = np.linalg.norm(mesh.vertices - positions[j], axis=1)
        kernel = np.sqrt(counts[j] / (1.0 + np.abs(d / params.alpha) ** order))
        np.maximum(weights, kernel, out=weights)
    if not params.normalize_counts:
        np.minimum(weights, 1.0, out=weights)
    return HeatMap(mesh=mesh, weights=weights, role="density")


@dataclass(frozen=True)
class OptimizeRound:
    density: HeatMap
    layout: NoduleLayout
    nodules_before: int
    nodules_after: int
    near_contact_count: int


def optimize_round(mesh: TriMesh, shell, density: HeatMap,
                   layout: NoduleLayout,
                   source: str | Path | list[ContactEvent] | SweepTrajectory,
                   params: HeuristicParams | None = None,
                   onsets: bool = False) -> OptimizeRound:
    """One optimization pass: contacts in, new density map and layout out.

    `source` is a contact log path, an event list, or a sweep trajectory.
    The prior density map is replaced, not blended; resampling runs with
    the layout's original sampling parameters.
    """
    del density  # superseded by the contact-driven map
    params = (params or HeuristicParams()).resolved(layout)
    if isinstance(source, SweepTrajectory):
        events = simulate_contacts(shell, layout, source)
        hist = histogram_from_events(events, layout, onsets=onsets)
    elif isinstance(source, (str, Path)):
        hist = ingest_contact_log(source, layout, onsets=onsets)
    else:
        hist = histogram_from_events(list(source), layout, onsets=onsets)

    new_density = optimize_heatmap(mesh, layout, hist, params)
    new_layout = sample_nodules(shell, new_density, layout.params)

    by_id = {n.id: n for n in layout.nodules}
    contacted = [by_id[nid] for nid, c in hist.counts.items() if c > 0]
    near = 0
    if contacted:
        cpos = np.array([n.position for n in contacted])
        for nod in new_layout.nodules:
            if np.linalg.norm(cpos - nod.position, axis=1).min() <= params.alpha:
                near += 1
    log.info("optimize round: %d nodules -> %d (%d within alpha of contacts)",
             len(layout), len(new_layout), near)
    return OptimizeRound(density=new_density, layout=new_layout,
                         nodules_before=len(layout),
                         nodules_after=len(new_layout),
                         near_contact_count=near)
