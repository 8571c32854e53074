"""Release gate: one end-to-end test per numbered criterion.

Each test re-derives its expected values through the independent oracles in
tests/oracles.py or through closed-form arithmetic, never through the code
under test. The conftest summary hook prints one PASS/FAIL line per
criterion at the end of the run.
"""

import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

import oracles
from conftest import shell_of
from skinforge.chain import (FilamentSpec, assign_resistances, order_chain,
                             route_traces)
from skinforge.cli import main as cli_main
from skinforge.contacts import (ContactHistogram, HeuristicParams,
                                butterworth_weight, optimize_heatmap)
from skinforge.errors import ChainDesignError, ConfigError
from skinforge.heatmap import HeatMap, uniform_map
from skinforge.intersect import detect_self_intersections
from skinforge.mesh import TriMesh, load_mesh, save_stl
from skinforge.pipeline import characterize, load_config, run_pipeline
from skinforge.sampler import (Nodule, NoduleLayout, SamplingParams,
                               sample_nodules)
from skinforge.service import create_app
from skinforge.shapes import flat_plate, icosphere, v_groove
from skinforge.snr import (PhaseStats, Protocol, aggregate_trials,
                           pairwise_min_snr, segment_trace, snr)
from skinforge.spline import BoundarySpline, fit_closed, resample_arclength


def handmade_layout(mesh, positions, radius=0.005):
    """Nodules pinned at given points, +z normals, for chain fixtures."""
    params = SamplingParams(minimum_distribution_distance=0.01)
    nodules = tuple(
        Nodule(id=i, face=0, bary=np.array([1.0, 0.0, 0.0]),
               position=np.asarray(p, dtype=np.float64),
               normal=np.array([0.0, 0.0, 1.0]),
               weight=1.0, local_min_distance=0.01, radius=radius)
        for i, p in enumerate(positions))
    return NoduleLayout(mesh=mesh, nodules=nodules, params=params)


@pytest.mark.acceptance(1)
def test_criterion_1_kernel_and_density_map_match_brute_force():
    start = time.monotonic()

    # half-power point: the kernel is 1/sqrt(2) at distance alpha, any order
    for order in range(1, 7):
        params = HeuristicParams(alpha=0.17, filter_order=order)
        got = butterworth_weight(0.17, 1.0, params)
        assert abs(got - 1.0 / math.sqrt(2.0)) <= 1e-12

    # map construction equals the vertices x nodules double loop
    rng = np.random.default_rng(11)
    meshes = [flat_plate(0.3, 30), icosphere(0.05, 3)]
    for mesh in meshes:
        assert mesh.n_vertices <= 5000
    scales = [(0.06, 0.13), (0.02, 0.05)]  # d_min range per mesh
    for k in range(20):
        mesh = meshes[k % 2]
        lo, hi = scales[k % 2]
        density = uniform_map(mesh, 1.0, "density")
        layout = sample_nodules(mesh, density, SamplingParams(
            minimum_distribution_distance=float(rng.uniform(lo, hi)),
            max_samples=24, seed=int(rng.integers(1 << 30))))
        counts = {n.id: int(rng.integers(0, 9)) for n in layout.nodules}
        if max(counts.values()) == 0:
            counts[layout.nodules[0].id] = 3
        params = HeuristicParams(alpha=float(rng.uniform(0.05, 0.3)),
                                 filter_order=int(rng.integers(1, 5)),
                                 normalize_counts=bool(rng.integers(0, 2)))
        got = optimize_heatmap(
            mesh, layout, ContactHistogram(counts=counts, layout=layout),
            params)
        want = oracles.optimize_heatmap_reference(
            mesh.vertices, layout.positions(),
            [counts[n.id] for n in layout.nodules],
            params.alpha, params.filter_order, params.normalize_counts)
        assert np.max(np.abs(got.weights - np.asarray(want))) <= 1e-12

    assert time.monotonic() - start < 10.0


def alternating_trace(mu_p, rate=10.0, nid=0):
    """Capture with exact phase statistics: the unpressed level alternates
    90/110 (mean 100, population std 10) and the pressed level is constant."""
    protocol = Protocol()
    n = int(round(protocol.total * rate)) + 1
    t = np.arange(n) / rate
    d1, d2, _ = protocol.phases
    pressed = (t > d1) & (t <= d1 + d2)
    toggle = 90.0 + 20.0 * (np.arange(n) % 2)
    from skinforge.snr import CaptureTrace
    return CaptureTrace(nodule_id=nid, times=t,
                        values=np.where(pressed, mu_p, toggle), rate_hz=rate)


@pytest.mark.acceptance(2)
def test_criterion_2_snr_ratio_classes_and_aggregation():
    # textbook ratio, exact
    assert snr(PhaseStats(mu_unpressed=100.0, mu_pressed=170.0,
                          sigma_unpressed=10.0)) == 7.0

    # two-nodule enumeration: every off-diagonal entry is 7
    stats = [PhaseStats(100.0, 170.0, 10.0, nodule_id=0),
             PhaseStats(100.0, 170.0, 10.0, nodule_id=1)]
    report = pairwise_min_snr(stats)
    assert report.min_snr == 7.0
    assert report.classification == "minimum"

    # three synthetic trials engineered to land minima of exactly 8, 9, 9
    minima = []
    for mu_a, mu_b in ((180.0, 190.0), (190.0, 195.0), (190.0, 200.0)):
        phase_stats = [
            segment_trace(alternating_trace(mu_a, nid=0), Protocol()),
            segment_trace(alternating_trace(mu_b, nid=1), Protocol()),
        ]
        minima.append(pairwise_min_snr(phase_stats).min_snr)
    assert minima == [8.0, 9.0, 9.0]
    agg = aggregate_trials(minima)
    assert str(agg) == "8.7 ± 0.5"
    assert agg.mean == pytest.approx(26.0 / 3.0)


@pytest.mark.acceptance(3)
def test_criterion_3_poisson_layout_on_a_square_meter():
    start = time.monotonic()
    mesh = flat_plate(1.0, 20)
    density = uniform_map(mesh, 1.0, "density")
    params = SamplingParams(minimum_distribution_distance=0.3, seed=7)
    layout = sample_nodules(mesh, density, params)
    positions = layout.positions()

    # dart-throwing rule, brute force over every pair
    exclusions = [n.local_min_distance for n in layout.nodules]
    assert oracles.poisson_violations(positions, exclusions) == []

    # saturation: a 0.01 m probe grid finds no admissible uncovered point
    axis = np.round(np.arange(-0.5, 0.5 + 1e-9, 0.01), 9)
    gx, gy = np.meshgrid(axis, axis)
    probes = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    assert oracles.uncovered_probes(probes, np.full(len(probes), 0.3),
                                    positions) == []

    # same seed, byte-identical layout
    again = sample_nodules(mesh, density, params)
    assert again.checksum == layout.checksum
    assert again.positions().tobytes() == positions.tobytes()
    assert [n.id for n in again.nodules] == [n.id for n in layout.nodules]

    # doubling the spacing never increases the count
    for seed in range(10):
        small = sample_nodules(mesh, density, replace(params, seed=seed))
        big = sample_nodules(
            mesh, density,
            replace(params, minimum_distribution_distance=0.6, seed=seed))
        assert len(big) <= len(small)

    assert time.monotonic() - start < 30.0


@pytest.mark.acceptance(4)
def test_criterion_4_cutout_spline_extrusion_and_overlap():
    from skinforge.cutout import extract_cutout
    from skinforge.errors import GeometryError

    # raising the cutoff never adds faces
    mesh = flat_plate(0.1, 10)
    rng = np.random.default_rng(13)
    for _ in range(50):
        hmap = HeatMap(mesh=mesh, weights=rng.random(mesh.n_vertices),
                       role="skin")
        lo, hi = sorted(float(c) for c in rng.uniform(0.05, 0.95, size=2))

        def kept(cutoff):
            try:
                return set(extract_cutout(mesh, hmap, cutoff)
                           .face_indices.tolist())
            except GeometryError:
                return set()

        assert kept(hi) <= kept(lo)

    # closed spline interpolates its knots; tangents agree from both sides
    angles = np.linspace(0.0, 2.0 * np.pi, 14, endpoint=False)
    ring = np.column_stack([
        (0.05 + 0.012 * np.sin(3 * angles)) * np.cos(angles),
        (0.05 + 0.012 * np.sin(3 * angles)) * np.sin(angles),
        0.004 * np.cos(2 * angles)])
    pts, knots = fit_closed(ring)
    spline = BoundarySpline(control_points=pts, knots=knots,
                            resampled=resample_arclength(pts, knots, 32))
    for k in range(spline.n_control):
        assert np.linalg.norm(spline.evaluate(knots[k]) - pts[k]) <= 1e-9
        incoming, outgoing = spline.one_sided_tangents(k)
        rel = np.linalg.norm(incoming - outgoing) / np.linalg.norm(outgoing)
        assert rel <= 1e-6

    # planar extrusion: volume is exactly footprint area times thickness
    thickness = 0.004
    shell = shell_of(mesh, thickness, ratio=None)
    assert shell.volume == pytest.approx(0.1 * 0.1 * thickness, rel=1e-6)

    # folded-shell overlap, against the all-pairs triangle oracle
    groove = v_groove(half_width=0.01, length=0.06, bands=6, rings=2)
    thick = shell_of(groove, 0.015, ratio=None)
    thin = shell_of(groove, 0.0015, ratio=None)
    for folded, want_hits in ((thick, True), (thin, False)):
        assert folded.mesh.n_faces <= 2000
        found = detect_self_intersections(folded)
        reference = oracles.all_pairs_intersections(folded.mesh)
        assert set(found) == set(reference)
        assert bool(found) is want_hits


@pytest.mark.acceptance(5)
def test_criterion_5_chain_resistances_and_routed_lengths():
    big = flat_plate(0.8, 8)
    shell = shell_of(big, 0.003, ratio=None)
    spec = FilamentSpec()
    rng = np.random.default_rng(5)

    def random_layout():
        # gaps of 90-130 mm with light lateral jitter keep every pairwise
        # distance over the spacing floor and the greedy chain monotone in
        # x, so routed segments can never cross
        n = int(rng.integers(4, 7))
        xs = float(rng.uniform(-0.38, -0.33)) + np.concatenate(
            [[0.0], np.cumsum(rng.uniform(0.09, 0.13, size=n - 1))])
        pts = [np.array([x, float(rng.uniform(-0.03, 0.03)), 0.003])
               for x in xs]
        return handmade_layout(big, pts, radius=0.002)

    for _ in range(100):
        layout = random_layout()
        order = order_chain(layout, start=0)
        design = assign_resistances(order, layout, spec)
        cum = np.asarray(design.cumulative_resistances)
        assert (np.diff(cum) > 0).all()
        for i in range(len(cum)):
            for j in range(i + 1, len(cum)):
                assert cum[j] - cum[i] >= spec.margin - 1e-9
        routed = route_traces(shell, design)
        for poly, want in zip(routed.trace_polylines,
                              design.segment_resistances):
            printed = oracles.polyline_length_reference(poly) * 256.0
            assert abs(printed - want) <= 0.005 * want

    # spacing floor, both at FilamentSpec construction and between nodules
    with pytest.raises(ConfigError, match=r"below the 9 mm floor"):
        FilamentSpec(min_nodule_spacing=0.008)
    close = handmade_layout(big, [[0.0, 0.0, 0.003], [0.008, 0.0, 0.003]])
    with pytest.raises(ChainDesignError, match=r"8\.0 mm apart, below"):
        assign_resistances((0, 1), close, FilamentSpec(
            min_nodule_spacing=0.009))

    # six sensors along a 0.65 m link: total lands in the printable band
    xs = np.array([0.0, 0.13, 0.27, 0.40, 0.52, 0.65]) - 0.325
    link = handmade_layout(big, [[x, 0.0, 0.003] for x in xs])
    order = order_chain(link, start=0)
    design = assign_resistances(order, link, spec)
    assert 100.0 <= design.total_resistance <= 600.0


GOLDEN_TOML = """\
name = "unit1"
seed = 3

[mesh]
path = "plate.stl"

[skin]
value = 1.0

[density]
value = 1.0

[cutout]
thickness = 0.003

[sampling]
minimum_distribution_distance = 0.05
max_samples = 6

[output]
directory = "{out}"
"""


@pytest.mark.acceptance(6)
def test_criterion_6_manifest_reproducibility_and_tamper_detection(tmp_path):
    plate_path = tmp_path / "plate.stl"
    save_stl(flat_plate(0.2, 10), plate_path)

    def write_config(tag):
        cfg = tmp_path / f"unit_{tag}.toml"
        cfg.write_text(GOLDEN_TOML.format(out=f"out_{tag}"))
        return cfg

    # two library runs, byte-identical manifests
    run_pipeline(load_config(write_config("a")))
    run_pipeline(load_config(write_config("b")))
    manifest_a = (tmp_path / "out_a" / "unit1_manifest.json").read_bytes()
    manifest_b = (tmp_path / "out_b" / "unit1_manifest.json").read_bytes()
    assert manifest_a == manifest_b

    # CLI run, same bytes
    assert cli_main(["generate", "--config", str(write_config("c"))]) == 0
    manifest_cli = (tmp_path / "out_c" / "unit1_manifest.json").read_bytes()
    assert manifest_cli == manifest_a

    # HTTP run on the same mesh and parameters, same bytes
    mesh = load_mesh(plate_path)
    client = TestClient(create_app())
    sid = client.post("/v1/sessions", json={
        "name": "unit1",
        "source": {"vertices": mesh.vertices.tolist(),
                   "faces": mesh.faces.tolist()}}).json()["session_id"]
    gen = client.post(f"/v1/sessions/{sid}/generate", json={
        "seed": 3,
        "sampling": {"minimum_distribution_distance": 0.05,
                     "max_samples": 6}})
    assert gen.status_code == 200, gen.text
    assert client.get(f"/v1/sessions/{sid}/manifest").content == manifest_a

    # a mutated input mesh no longer matches the recorded checksum
    manifest = json.loads(manifest_a)
    mutated = TriMesh(vertices=mesh.vertices + [[1e-4, 0.0, 0.0]],
                      faces=mesh.faces)
    save_stl(mutated, tmp_path / "plate_mut.stl")
    assert load_mesh(tmp_path / "plate_mut.stl").checksum \
        != manifest["mesh_checksum"]

    # and a tampered printed body is rejected outright
    body_path = tmp_path / "out_a" / "unit1_body.stl"
    body = load_mesh(body_path)
    tampered = TriMesh(vertices=body.vertices + [[0.0, 0.0, 1e-5]],
                       faces=body.faces)
    tampered_path = tmp_path / "tampered_body.stl"
    save_stl(tampered, tampered_path)
    with pytest.raises(ConfigError,
                       match="does not match the manifest checksum"):
        characterize(manifest, load_mesh(tampered_path),
                     body_path=tampered_path)


@pytest.mark.acceptance(7)
def test_criterion_7_contacts_concentrate_the_resampled_layout():
    mesh = flat_plate(1.0, 50)
    shell = shell_of(mesh, 0.003, ratio=None)
    density0 = uniform_map(mesh, 1.0, "density")
    base = SamplingParams(minimum_distribution_distance=0.04)
    heur = HeuristicParams(alpha=0.15, filter_order=2)
    alpha = heur.alpha

    # the kernel itself forbids admissible points beyond 3 alpha
    assert butterworth_weight(3 * alpha, 1.0, heur) < base.fill_tolerance

    for seed in range(10):
        params = replace(base, seed=seed)
        before = sample_nodules(shell, density0, params)
        pos_before = before.positions()
        target = before.nodules[int(np.argmin(
            np.linalg.norm(pos_before[:, :2] - [0.25, 0.25], axis=1)))]
        counts = {n.id: 0 for n in before.nodules}
        counts[target.id] = 5
        density = optimize_heatmap(
            mesh, before, ContactHistogram(counts=counts, layout=before),
            heur)
        after = sample_nodules(shell, density, params)
        pos_after = after.positions()

        d_after = np.linalg.norm(pos_after - target.position, axis=1)
        assert d_after.max() <= 3 * alpha

        near_before = int(np.count_nonzero(
            np.linalg.norm(pos_before - target.position, axis=1) <= alpha))
        near_after = int(np.count_nonzero(d_after <= alpha))
        assert near_after >= near_before
