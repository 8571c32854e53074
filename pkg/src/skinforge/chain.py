"""Serial RC sensing chain: nodule ordering, resistances, trace routing.

All nodules share one conductive trace. A touch at nodule k charges the
line through the cumulative resistance up to k, so each nodule needs a
cumulative value separated from every other by a margin large enough for a
microcontroller to tell the delays apart. Segments that are electrically
too short get their trace serpentine-inflated inside the shell wall until
the printed length delivers the assigned resistance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import permutations

import numpy as np

from .errors import ChainDesignError, ConfigError
from .sampler import NoduleLayout

# Spacing below 9 mm makes neighboring RC delays indistinguishable.
HARD_SPACING_FLOOR = 0.009
# Recommended pitch; reliable in practice.
DEFAULT_SPACING = 0.06
DEFAULT_RESISTIVITY = 256.0  # ohm/mm
DEFAULT_MARGIN = 20.0  # kOhm between consecutive cumulative resistances
DEFAULT_TRACE_DIAMETER = 0.0015  # m
SURFACE_CLEARANCE = 0.0005  # m kept between trace centerline and shell skin


@dataclass(frozen=True)
class FilamentSpec:
    resistivity: float = DEFAULT_RESISTIVITY  # ohm per mm of trace
    min_nodule_spacing: float = DEFAULT_SPACING  # m
    margin: float = DEFAULT_MARGIN  # kOhm

    def __post_init__(self) -> None:
        if self.resistivity <= 0 or self.min_nodule_spacing <= 0 or self.margin <= 0:
            raise ConfigError("filament spec values must be positive")
        if self.min_nodule_spacing < HARD_SPACING_FLOOR:
            raise ConfigError(
                f"min_nodule_spacing {self.min_nodule_spacing * 1000:.1f} mm is "
                f"below the {HARD_SPACING_FLOOR * 1000:.0f} mm floor")


@dataclass(frozen=True)
class ChainDesign:
    layout: NoduleLayout
    spec: FilamentSpec
    order: tuple[int, ...]
    segment_resistances: np.ndarray  # kOhm, one per consecutive pair
    cumulative_resistances: np.ndarray  # kOhm at each nodule, feed end = 0
    trace_polylines: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        seg = np.asarray(self.segment_resistances, dtype=np.float64)
        cum = np.asarray(self.cumulative_resistances, dtype=np.float64)
        if sorted(self.order) != sorted(n.id for n in self.layout.nodules):
            raise ChainDesignError("order is not a permutation of the layout")
        if len(cum) != len(self.order) or len(seg) != len(self.order) - 1:
            raise ChainDesignError("resistance arrays do not match the order")
        if len(cum) > 1 and not (np.diff(cum) > 0).all():
            raise ChainDesignError("cumulative resistances must strictly increase")
        seg.setflags(write=False)
        cum.setflags(write=False)
        object.__setattr__(self, "segment_resistances", seg)
        object.__setattr__(self, "cumulative_resistances", cum)

    @property
    def total_resistance(self) -> float:
        """kOhm across the whole chain."""
        return float(self.segment_resistances.sum())


def order_chain(layout: NoduleLayout, start: int = 0,
                exhaustive: bool = False) -> tuple[int, ...]:
    """Visit order for the serial chain, starting at the feed nodule.

    Greedy nearest neighbor with ties broken toward the lower id. The
    exhaustive flag minimizes total path length instead (9 nodules max).
    """
    ids = [n.id for n in layout.nodules]
    if not ids:
        raise ChainDesignError("cannot order an empty layout")
    if start not in ids:
        raise ConfigError(f"start nodule {start} is not in the layout")
    pos = {n.id: n.position for n in layout.nodules}

    if exhaustive:
        if len(ids) > 9:
            raise ConfigError("exhaustive ordering is limited to 9 nodules")
        rest = [i for i in ids if i != start]
        best: tuple[float, tuple[int, ...]] | None = None
        for perm in permutations(rest):
            path = (start, *perm)
            length = sum(float(np.linalg.norm(pos[a] - pos[b]))
                         for a, b in zip(path, path[1:]))
            key = (length, path)
            if best is None or key < best:
                best = key
        return best[1]

    remaining = set(ids)
    remaining.remove(start)
    order = [start]
    while remaining:
        here = pos[order[-1]]
        nxt = min(remaining,
                  key=lambda i: (float(np.linalg.norm(pos[i] - here)), i))
        order.append(nxt)
        remaining.remove(nxt)
    return tuple(order)


def assign_resistances(order: tuple[int, ...], layout: NoduleLayout,
                       spec: FilamentSpec) -> ChainDesign:
    """Per-segment resistance: printed distance, inflated up to the margin.

    Distance in m times resistivity in ohm/mm is numerically kOhm. Every
    segment is raised to at least the margin so cumulative values stay
    pairwise separated by it.
    """
    pos = {n.id: n.position for n in layout.nodules}
    segments = []
    for a, b in zip(order, order[1:]):
        d = float(np.linalg.norm(pos[a] - pos[b]))
        if d < spec.min_nodule_spacing:
            raise ChainDesignError(
                f"nodules {a} and {b} are {d * 1000:.1f} mm apart, below the "
                f"{spec.min_nodule_spacing * 1000:.1f} mm minimum spacing")
        segments.append(max(d * spec.resistivity, spec.margin))
    seg = np.array(segments, dtype=np.float64)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return ChainDesign(layout=layout, spec=spec, order=tuple(order),
                       segment_resistances=seg, cumulative_resistances=cum)


def _seg_point_distance(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Distance from points p (k,3) to segment ab."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return np.linalg.norm(p - a, axis=-1)
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    proj = a + np.outer(t, ab)
    return np.linalg.norm(p - proj, axis=-1)


def _seg_seg_distance(p1, q1, p2, q2) -> float:
    """Min distance between segments p1q1 and p2q2 (Eberly's method)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    if a == 0 and e == 0:
        return float(np.linalg.norm(r))
    if a == 0:
        t = np.clip(f / e, 0.0, 1.0)
        return float(np.linalg.norm(p1 - (p2 + t * d2)))
    c = d1 @ r
    if e == 0:
        s = np.clip(-c / a, 0.0, 1.0)
        return float(np.linalg.norm(p1 + s * d1 - p2))
    b = d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom != 0 else 0.0
    t = (b * s + f) / e
    if t < 0:
        t = 0.0
        s = np.clip(-c / a, 0.0, 1.0)
    elif t > 1:
        t = 1.0
        s = np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p1 + s * d1 - (p2 + t * d2)))


def _polyline_pair_distance(poly1: np.ndarray, poly2: np.ndarray) -> float:
    best = math.inf
    for i in range(len(poly1) - 1):
        for j in range(len(poly2) - 1):
            best = min(best, _seg_seg_distance(poly1[i], poly1[i + 1],
                                               poly2[j], poly2[j + 1]))
    return best


def _zigzag_length(span: float, n_points: int, amplitude: float) -> float:
    h = span / (n_points + 1)
    return (2 * math.hypot(h, amplitude)
            + (n_points - 1) * math.hypot(h, 2 * amplitude))


def _zigzag_polyline(qa: np.ndarray, qb: np.ndarray, lateral: np.ndarray,
                     n_points: int, amplitude: float) -> np.ndarray:
    u = qb - qa
    h = 1.0 / (n_points + 1)
    pts = [qa]
    for i in range(1, n_points + 1):
        sign = 1.0 if i % 2 == 1 else -1.0
        pts.append(qa + u * (i * h) + lateral * (sign * amplitude))
    pts.append(qb)
    return np.array(pts)


def polyline_length(poly: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(poly, axis=0), axis=1).sum())


def route_traces(shell, design: ChainDesign,
                 trace_diameter: float = DEFAULT_TRACE_DIAMETER) -> ChainDesign:
    """Lay each segment's trace at mid-thickness inside the shell wall.

    Straight runs carry segments whose resistance equals their printed
    distance; margin-inflated segments get a tangent-plane serpentine whose
    amplitude is bisected until printed length times resistivity matches
    the assigned resistance. Amplitude is capped by the distance to the
    cutout walls and to other nodules; the zigzag pitch stays printable at
    twice the trace diameter.
    """
    if shell.thickness <= trace_diameter:
        raise ChainDesignError(
            f"shell thickness {shell.thickness * 1000:.1f} mm does not admit a "
            f"{trace_diameter * 1000:.1f} mm trace channel")
    if shell.thickness / 2 < SURFACE_CLEARANCE:
        raise ChainDesignError("shell too thin to keep trace surface clearance")

    layout = design.layout
    by_id = {n.id: n for n in layout.nodules}
    # nodule positions sit on the outer surface; drop to mid-thickness
    drop = shell.thickness / 2
    mid = {i: by_id[i].position - drop * by_id[i].normal for i in by_id}

    h_min = 2 * trace_diameter
    polylines: list[np.ndarray] = []
    for k, (a, b) in enumerate(zip(design.order, design.order[1:])):
        qa, qb = mid[a], mid[b]
        span = float(np.linalg.norm(qb - qa))
        target = float(design.segment_resistances[k]) / design.spec.resistivity
        if abs(span - target) <= 0.005 * target:
            polylines.append(np.array([qa, qb]))
            continue

        u = (qb - qa) / span
        n_avg = by_id[a].normal + by_id[b].normal
        lateral = np.cross(u, n_avg)
        norm = np.linalg.norm(lateral)
        if norm < 1e-12:
            seed = np.zeros(3)
            seed[int(np.argmin(np.abs(u)))] = 1.0
            lateral = np.cross(u, seed)
            norm = np.linalg.norm(lateral)
        lateral = lateral / norm

        cap = math.inf
        for midline in shell.wall_midlines:
            cap = min(cap, float(_seg_point_distance(qa, qb, midline).min()))
        for nid, nod in by_id.items():
            if nid in (a, b):
                continue
            d = float(_seg_point_distance(qa, qb, mid[nid][None, :])[0])
            cap = min(cap, d - (nod.radius or 0.0))
        amp_max = cap - trace_diameter / 2 - SURFACE_CLEARANCE

        n_max = int(span / h_min) - 1
        routed = None
        if amp_max > 0:
            for n_points in range(1, max(n_max, 0) + 1):
                if _zigzag_length(span, n_points, amp_max) < target:
                    continue
                lo, hi = 0.0, amp_max
                for _ in range(100):
                    amp = 0.5 * (lo + hi)
                    if _zigzag_length(span, n_points, amp) < target:
                        lo = amp
                    else:
                        hi = amp
                routed = _zigzag_polyline(qa, qb, lateral, n_points, hi)
                break
        if routed is None:
            raise ChainDesignError(
                f"segment {a}-{b} cannot fit {target * 1000:.1f} mm of trace "
                "inside the shell corridor")
        polylines.append(routed)

    for i in range(len(polylines)):
        for j in range(i + 2, len(polylines)):  # adjacent pairs meet at a nodule
            if _polyline_pair_distance(polylines[i], polylines[j]) < trace_diameter:
                raise ChainDesignError(
                    f"routed traces for segments {i} and {j} cross")

    for k, poly in enumerate(polylines):
        printed = polyline_length(poly) * design.spec.resistivity
        want = float(design.segment_resistances[k])
        if abs(printed - want) > 0.005 * want:
            raise ChainDesignError(
                f"segment {k} routed to {printed:.3f} kOhm, wanted {want:.3f}")

    return replace(design, trace_polylines=tuple(polylines))


@dataclass(frozen=True)
class CalibrationEntry:
    nodule_id: int
    expected_delay: float  # unit touch capacitance, so numerically kOhm
    band_low: float
    band_high: float


@dataclass(frozen=True)
class CalibrationTable:
    entries: tuple[CalibrationEntry, ...]

    def __post_init__(self) -> None:
        for prev, cur in zip(self.entries, self.entries[1:]):
            if prev.band_high > cur.band_low:
                raise ChainDesignError("calibration bands overlap")

    def classify(self, delay: float) -> int:
        """Nodule id whose band contains the measured delay."""
        for e in self.entries:
            if e.band_low <= delay < e.band_high:
                return e.nodule_id
        raise ChainDesignError(f"delay {delay} falls outside all bands")


def expected_rc_table(design: ChainDesign) -> CalibrationTable:
    """Per-nodule expected delay with midpoint threshold bands.

    Delays are cumulative resistance times a unit touch capacitance; the
    decision boundary between consecutive nodules sits at the midpoint of
    their cumulative values, with open ends at the chain extremes.
    """
    cum = design.cumulative_resistances
    entries = []
    for k, nid in enumerate(design.order):
        low = -math.inf if k == 0 else 0.5 * (cum[k - 1] + cum[k])
        high = math.inf if k == len(cum) - 1 else 0.5 * (cum[k] + cum[k + 1])
        entries.append(CalibrationEntry(nodule_id=nid,
                                        expected_delay=float(cum[k]),
                                        band_low=float(low),
                                        band_high=float(high)))
    return CalibrationTable(entries=tuple(entries))
