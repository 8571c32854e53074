"""Signal-to-noise analysis of capacitive touch traces.

A trace follows a press protocol (rest, press, release). Unpressed
statistics pool the rest and release phases; SNR is |mu_U - mu_P| / sigma_U.
Skin units are scored by the minimum entry of the pairwise target/reference
matrix and classified against the 7 (minimum) and 15 (robust) thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

SNR_MINIMUM = 7.0
SNR_ROBUST = 15.0
DEFAULT_GUARD = 0.25  # s trimmed on both sides of internal phase boundaries


@dataclass(frozen=True)
class Protocol:
    """Press protocol: phase durations in seconds (rest, press, release)."""

    phases: tuple[float, float, float] = (3.0, 3.0, 3.0)
    guard: float = DEFAULT_GUARD

    def __post_init__(self) -> None:
        if len(self.phases) != 3 or any(d <= 0 for d in self.phases):
            raise ConfigError("protocol needs three positive phase durations")
        if self.guard < 0:
            raise ConfigError("guard must be nonnegative")

    @property
    def total(self) -> float:
        return float(sum(self.phases))


@dataclass(frozen=True)
class CaptureTrace:
    nodule_id: int
    times: np.ndarray
    values: np.ndarray
    rate_hz: float = 0.0

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape or len(t) == 0:
            raise ConfigError("trace needs matching 1D time and value arrays")
        if len(t) > 1 and not (np.diff(t) > 0).all():
            raise ConfigError("trace timestamps must strictly increase")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class PhaseStats:
    mu_unpressed: float
    mu_pressed: float
    sigma_unpressed: float
    nodule_id: int = -1

    def __post_init__(self) -> None:
        if self.sigma_unpressed < 0:
            raise ConfigError("sigma_unpressed must be nonnegative")


def segment_trace(trace: CaptureTrace,
                  protocol: Protocol = Protocol()) -> PhaseStats:
    """Split a trace into protocol phases and pool unpressed statistics.

    A guard interval around each internal phase boundary is discarded so
    finger-transition transients do not contaminate either side.
    """
    d1, d2, d3 = protocol.phases
    g = protocol.guard
    if trace.duration + 1e-9 < protocol.total:
        raise ConfigError(
            f"trace covers {trace.duration:.2f} s, protocol needs "
            f"{protocol.total:.2f} s")
    t = trace.times - trace.times[0]
    v = trace.values
    rest = v[t <= d1 - g]
    press = v[(t >= d1 + g) & (t <= d1 + d2 - g)]
    release = v[t >= d1 + d2 + g]
    unpressed = np.concatenate([rest, release])
    if len(unpressed) == 0 or len(press) == 0:
        raise ConfigError("a protocol phase is empty after guard trimming")
    return PhaseStats(mu_unpressed=float(unpressed.mean()),
                      mu_pressed=float(press.mean()),
                      sigma_unpressed=float(unpressed.std()),
                      nodule_id=trace.nodule_id)


def snr(stats: PhaseStats) -> float:
    """|mu_U - mu_P| / sigma_U with a sentinel policy at sigma_U = 0."""
    diff = abs(stats.mu_unpressed - stats.mu_pressed)
    if stats.sigma_unpressed == 0:
        return math.inf if diff > 0 else 0.0
    return diff / stats.sigma_unpressed


def _classify(min_snr: float) -> str:
    if min_snr < SNR_MINIMUM:
        return "fail"
    if min_snr < SNR_ROBUST:
        return "minimum"
    return "robust"


@dataclass(frozen=True)
class SnrReport:
    nodule_ids: tuple[int, ...]
    matrix: np.ndarray  # [target j, reference i]
    min_snr: float = field(init=False)
    classification: str = field(init=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        off = ~np.eye(len(m), dtype=bool)
        object.__setattr__(self, "min_snr", float(m[off].min()))
        object.__setattr__(self, "classification", _classify(self.min_snr))

    def as_dict(self) -> dict:
        def cell(x: float):
            return x if math.isfinite(x) else None
        return {
            "nodule_ids": list(self.nodule_ids),
            "matrix": [[cell(x) for x in row] for row in self.matrix],
            "min_snr": cell(self.min_snr),
            "classification": self.classification,
        }


def pairwise_min_snr(all_stats: list[PhaseStats]) -> SnrReport:
    """Target-vs-reference SNR matrix and its off-diagonal minimum.

    Entry [j, i] presses nodule j and reads it against nodule i's
    unpressed statistics. The diagonal (self SNR) is reported but
    excluded from the minimum.
    """
    n = len(all_stats)
    if n < 2:
        raise ConfigError("pairwise SNR needs at least 2 nodules")
    m = np.empty((n, n))
    for j, target in enumerate(all_stats):
        for i, ref in enumerate(all_stats):
            m[j, i] = snr(PhaseStats(mu_unpressed=ref.mu_unpressed,
                                     mu_pressed=target.mu_pressed,
                                     sigma_unpressed=ref.sigma_unpressed))
    ids = tuple(s.nodule_id for s in all_stats)
    return SnrReport(nodule_ids=ids, matrix=m)


@dataclass(frozen=True)
class TrialAggregate:
    mean: float
    half_range: float
    std: float

    def __str__(self) -> str:
        return f"{self.mean:.1f} ± {self.half_range:.1f}"


def aggregate_trials(min_snrs: list[float]) -> TrialAggregate:
    """Mean plus half the spread across repeated trials (and the std)."""
    if not min_snrs:
        raise ConfigError("no trials to aggregate")
    vals = np.asarray(min_snrs, dtype=np.float64)
    return TrialAggregate(mean=float(vals.mean()),
                          half_range=float((vals.max() - vals.min()) / 2),
                          std=float(vals.std()))


def report_text(reports: list[SnrReport], unit: str = "skin unit") -> str:
    """Plain-text trial table: one column per trial, then the aggregate."""
    mins = [r.min_snr for r in reports]
    agg = aggregate_trials(mins)
    cols = " | ".join(f"{m:.0f}" for m in mins)
    worst = _classify(min(mins))
    return (f"{unit} | {cols} | {agg}\n"
            f"classification: {worst} "
            f"(fail < {SNR_MINIMUM:.0f} <= minimum < {SNR_ROBUST:.0f} <= robust)")


TRACE_HEADER = "# nodule:"


def write_trace(path: str | Path, trace: CaptureTrace) -> None:
    lines = [f"{TRACE_HEADER}{trace.nodule_id} rate_hz:{float(trace.rate_hz)!r}"]
    for t, v in zip(trace.times, trace.values):
        lines.append(f"{float(t)!r} {float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_trace(path: str | Path) -> CaptureTrace:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"trace file not found: {path}")
    nodule_id = -1
    rate = 0.0
    times: list[float] = []
    values: list[float] = []
    for lineno, raw in enumerate(path.read_text(encoding="ascii").splitlines(),
                                 start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(TRACE_HEADER):
                try:
                    fields = dict(part.split(":", 1)
                                  for part in line[2:].split())
                    nodule_id = int(fields["nodule"])
                    rate = float(fields.get("rate_hz", 0.0))
                except (ValueError, KeyError) as exc:
                    raise ConfigError(
                        f"bad trace header on line {lineno}: {raw!r}") from exc
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"malformed trace sample on line {lineno}: {raw!r}")
        try:
            times.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise ConfigError(
                f"malformed trace sample on line {lineno}: {raw!r}") from exc
    if nodule_id < 0:
        raise ConfigError(f"trace file missing its nodule header: {path}")
    return CaptureTrace(nodule_id=nodule_id, times=np.array(times),
                        values=np.array(values), rate_hz=rate)


def synth_trace(nodule_id: int, mu_unpressed: float, mu_pressed: float,
                sigma: float, protocol: Protocol = Protocol(),
                rate_hz: float = 100.0, seed: int = 0) -> CaptureTrace:
    """Gaussian-noise protocol trace for demos and analyzer checks."""
    rng = np.random.default_rng(seed)
    d1, d2, _ = protocol.phases
    n = int(round(protocol.total * rate_hz)) + 1
    t = np.arange(n) / rate_hz
    level = np.where((t > d1) & (t <= d1 + d2), mu_pressed, mu_unpressed)
    v = level + rng.normal(0.0, sigma, size=n)
    return CaptureTrace(nodule_id=nodule_id, times=t, values=v, rate_hz=rate_hz)
