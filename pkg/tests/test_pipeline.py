import hashlib
import json

import numpy as np
import pytest

from skinforge.cli import main as cli_main
from skinforge.errors import ChainDesignError, ConfigError, GeometryError
from skinforge.heatmap import HeatMap, save_heatmap
from skinforge.mesh import load_mesh, save_stl, signed_volume
from skinforge.pipeline import (characterize, load_config, run_pipeline,
                                serialize_manifest)
from skinforge.shapes import flat_plate, v_groove
from skinforge.snr import CaptureTrace, write_trace

BASE_TOML = """\
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
directory = "out"
"""


def write_unit(tmp_path, toml=BASE_TOML, mesh=None):
    save_stl(mesh if mesh is not None else flat_plate(0.2, 10),
              tmp_path / "plate.stl")
    cfg = tmp_path / "unit.toml"
    cfg.write_text(toml)
    return cfg


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="config file not found"):
            load_config(tmp_path / "nope.toml")

    def test_unparseable(self, tmp_path):
        cfg = tmp_path / "broken.toml"
        cfg.write_text("= 1\n")
        with pytest.raises(ConfigError, match="config does not parse"):
            load_config(cfg)

    def test_unknown_top_level_key(self, tmp_path):
        cfg = write_unit(tmp_path, "bogus = 1\n" + BASE_TOML)
        with pytest.raises(ConfigError,
                           match=r"unknown keys in \[top level\]: \['bogus'\]"):
            load_config(cfg)

    def test_unknown_section_key(self, tmp_path):
        cfg = write_unit(
            tmp_path, BASE_TOML.replace("[cutout]", "[cutout]\nwat = 2"))
        with pytest.raises(ConfigError,
                           match=r"unknown keys in \[cutout\]: \['wat'\]"):
            load_config(cfg)

    def test_mesh_section_required(self, tmp_path):
        cfg = tmp_path / "unit.toml"
        cfg.write_text('name = "x"\n')
        with pytest.raises(ConfigError,
                           match=r"config needs \[mesh\] with a path"):
            load_config(cfg)

    def test_defaults(self, tmp_path):
        cfg = write_unit(tmp_path)
        config = load_config(cfg)
        assert config.name == "unit1"
        assert config.seed == 3
        assert config.sampling.seed == 3  # run seed drives the sampler
        assert config.cutoff_tolerance == 0.5
        assert config.resample_ratio == 0.5
        assert config.thickness == 0.003
        assert config.trace_diameter == 0.0015
        assert config.filament is None
        spec = config.filament_spec
        assert spec.min_nodule_spacing == 0.05  # tied to sampling spacing
        assert spec.margin == 20.0

    def test_keyword_overrides(self, tmp_path):
        cfg = write_unit(tmp_path)
        config = load_config(cfg, seed=11, scale=2.0, out_dir=tmp_path / "o2",
                             allow_broken=True)
        assert config.seed == 11
        assert config.sampling.seed == 11
        assert config.scale == 2.0
        assert config.out_dir == tmp_path / "o2"
        assert config.allow_broken is True

    def test_brush_needs_geometry(self, tmp_path):
        toml = BASE_TOML + "\n[[skin.brush]]\nstrength = 1.0\n"
        cfg = write_unit(tmp_path, toml)
        with pytest.raises(ConfigError,
                           match=r"\[skin.brush\] needs center, extent"):
            load_config(cfg)

    def test_brush_unknown_shape(self, tmp_path):
        toml = (BASE_TOML + "\n[[skin.brush]]\nshape = \"blob\"\n"
                "center = [0, 0, 0]\nextent = 0.01\nstrength = 1.0\n")
        cfg = write_unit(tmp_path, toml)
        with pytest.raises(ConfigError, match="unknown shape or falloff"):
            load_config(cfg)

    def test_contact_log_and_trajectory_conflict(self, tmp_path):
        toml = (BASE_TOML + "\n[contacts]\nlog = \"x.log\"\n"
                "[contacts.trajectory]\nradius = 0.02\nstep = 0.005\n"
                "waypoints = [[0,0,0.1],[0,0,-0.1]]\n")
        cfg = write_unit(tmp_path, toml)
        with pytest.raises(ConfigError,
                           match="log or a trajectory, not both"):
            load_config(cfg)

    @pytest.mark.parametrize("section, msg", [
        ("[cutout]\ncutoff_tolerance = 1.0",
         r"cutoff_tolerance must lie in \[0, 1\)"),
        ("[cutout]\nresample_ratio = 0.0",
         r"resample_ratio must lie in \(0, 1\]"),
        ("[cutout]\nthickness = 0.0", "thickness must be positive"),
        ("[chain]\ntrace_diameter = 0.0", "trace_diameter must be positive"),
    ])
    def test_value_ranges(self, tmp_path, section, msg):
        cfg = write_unit(tmp_path, BASE_TOML.replace("[cutout]\nthickness = 0.003",
                                                     section))
        with pytest.raises(ConfigError, match=msg):
            load_config(cfg)

    def test_missing_inputs_reported_at_run(self, tmp_path):
        cfg = tmp_path / "unit.toml"
        cfg.write_text(BASE_TOML)  # plate.stl never written
        with pytest.raises(ConfigError, match="missing input files: .*plate"):
            run_pipeline(load_config(cfg))


class TestRunPipeline:
    def test_full_run_artifacts(self, tmp_path):
        result = run_pipeline(load_config(write_unit(tmp_path)))
        r = result.report
        assert r["name"] == "unit1"
        assert r["nodule_count"] == len(result.layout) > 3
        assert r["watertight"] is True
        assert r["self_intersection_pairs"] == 0
        assert r["optimized"] is False
        assert r["trace_segments"] == len(result.layout) - 1
        for key in ("body_stl", "conductive_stl", "manifest", "report"):
            assert result.outputs[key].is_file(), key

        body = load_mesh(result.outputs["body_stl"])
        assert abs(signed_volume(body)) * 1e6 == pytest.approx(
            r["shell_volume_cm3"], rel=1e-6)

        manifest = result.manifest
        assert manifest["mesh_checksum"] == result.mesh.checksum
        assert manifest["layout_checksum"] == result.layout.checksum
        assert sorted(manifest["chain"]["order"]) == \
            [n["id"] for n in manifest["nodules"]]
        assert manifest["calibration"][0]["band_low"] is None
        assert manifest["calibration"][-1]["band_high"] is None
        body_hash = hashlib.sha256(
            result.outputs["body_stl"].read_bytes()).hexdigest()
        assert manifest["artifacts"]["body_stl_sha256"] == body_hash
        assert result.outputs["manifest"].read_text() == \
            serialize_manifest(manifest) == result.manifest_text

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = write_unit(tmp_path)
        first = run_pipeline(load_config(cfg))
        second = run_pipeline(load_config(cfg))
        assert first.manifest_text == second.manifest_text
        assert first.outputs["body_stl"].read_bytes() == \
            second.outputs["body_stl"].read_bytes()

    def test_seed_changes_the_layout(self, tmp_path):
        cfg = write_unit(tmp_path)
        a = run_pipeline(load_config(cfg, seed=0))
        b = run_pipeline(load_config(cfg, seed=1))
        assert a.manifest["layout_checksum"] != b.manifest["layout_checksum"]

    def test_broken_shell_is_a_staged_geometry_error(self, tmp_path):
        groove = v_groove(half_width=0.01, length=0.06, bands=6, rings=2)
        toml = BASE_TOML.replace('path = "plate.stl"', 'path = "groove.stl"') \
                        .replace("thickness = 0.003", "thickness = 0.015") \
                        .replace("minimum_distribution_distance = 0.05",
                                 "minimum_distribution_distance = 0.01")
        save_stl(groove, tmp_path / "groove.stl")
        cfg = tmp_path / "unit.toml"
        cfg.write_text(toml)
        with pytest.raises(GeometryError,
                           match=r"\[skin-cutout\] shell self-intersects"):
            run_pipeline(load_config(cfg))

    def test_allow_broken_exports_anyway(self, tmp_path):
        groove = v_groove(half_width=0.01, length=0.06, bands=6, rings=2)
        toml = BASE_TOML.replace('path = "plate.stl"', 'path = "groove.stl"') \
                        .replace("thickness = 0.003", "thickness = 0.015") \
                        .replace("minimum_distribution_distance = 0.05",
                                 "minimum_distribution_distance = 0.01") \
                        .replace("max_samples = 6", "max_samples = 1")
        save_stl(groove, tmp_path / "groove.stl")
        cfg = tmp_path / "unit.toml"
        cfg.write_text(toml)
        result = run_pipeline(load_config(cfg, allow_broken=True))
        assert result.report["self_intersection_pairs"] > 0

    def test_split_cutout_is_rejected(self, tmp_path):
        mesh_path = tmp_path / "plate.stl"
        save_stl(flat_plate(0.1, 10), mesh_path)
        loaded = load_mesh(mesh_path)
        w = (np.abs(loaded.vertices[:, 0]) > 0.02).astype(float)
        save_heatmap(HeatMap(mesh=loaded, weights=w, role="skin"),
                     tmp_path / "skin.weights")
        toml = BASE_TOML.replace("[skin]\nvalue = 1.0",
                                 '[skin]\nsidecar = "skin.weights"')
        cfg = tmp_path / "unit.toml"
        cfg.write_text(toml)
        with pytest.raises(GeometryError,
                           match=r"\[skin-cutout\] cutout splits into 2 "
                                 r"disconnected patches"):
            run_pipeline(load_config(cfg))

    def test_trajectory_contacts_optimize_the_density(self, tmp_path):
        toml = BASE_TOML + (
            "\n[contacts.trajectory]\nradius = 0.02\nstep = 0.005\n"
            "waypoints = [[0.075, 0.087, 0.1], [0.075, 0.087, -0.1]]\n")
        cfg = write_unit(tmp_path, toml)
        result = run_pipeline(load_config(cfg))
        assert result.report["optimized"] is True
        sidecar = result.outputs["density_sidecar"]
        assert sidecar.is_file()
        assert "role:density" in sidecar.read_text().splitlines()[0]
        # contacts pull the layout toward the touched corner
        d = np.linalg.norm(
            result.layout.positions()[:, :2] - [0.075, 0.087], axis=1)
        assert d.min() < 0.05


class TestCharacterize:
    def test_row_from_run(self, tmp_path):
        result = run_pipeline(load_config(write_unit(tmp_path)))
        body = load_mesh(result.outputs["body_stl"])
        row = characterize(result.manifest, body,
                           body_path=result.outputs["body_stl"])
        assert row.name == "unit1"
        assert row.nodule_count == len(result.layout)
        assert row.volume_cm3 == pytest.approx(
            result.report["shell_volume_cm3"], rel=1e-6)
        want_radius = float(np.mean(result.layout.radii())) * 1000
        assert row.average_radius_mm == pytest.approx(want_radius)
        lines = row.text().splitlines()
        assert lines[0] == ("unit | nodules | volume (cm^3) | "
                            "total R (kOhm) | avg radius (mm)")
        assert lines[1].startswith("unit1 | ")

    def test_mutated_body_is_rejected(self, tmp_path):
        result = run_pipeline(load_config(write_unit(tmp_path)))
        stl = result.outputs["body_stl"]
        blob = bytearray(stl.read_bytes())
        blob[100] ^= 0xFF
        stl.write_bytes(bytes(blob))
        body = load_mesh(stl)
        with pytest.raises(ConfigError,
                           match="body mesh does not match the manifest"):
            characterize(result.manifest, body, body_path=stl)


class TestCli:
    def test_generate(self, tmp_path, capsys):
        cfg = write_unit(tmp_path)
        assert cli_main(["generate", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        first = out.splitlines()[0]
        assert first.startswith("unit1: ")
        assert "nodules" in first and "kOhm chain" in first
        assert "self-intersections: 0" in first
        assert "  manifest: " in out

    def test_generate_ignores_contacts(self, tmp_path, capsys):
        toml = BASE_TOML + (
            "\n[contacts.trajectory]\nradius = 0.02\nstep = 0.005\n"
            "waypoints = [[0.075, 0.087, 0.1], [0.075, 0.087, -0.1]]\n")
        cfg = write_unit(tmp_path, toml)
        assert cli_main(["generate", "--config", str(cfg)]) == 0
        report = json.loads((tmp_path / "out" / "unit1_report.json").read_text())
        assert report["optimized"] is False

    def test_optimize_requires_contacts(self, tmp_path, capsys):
        cfg = write_unit(tmp_path)
        assert cli_main(["optimize", "--config", str(cfg)]) == 2
        err = capsys.readouterr().err
        assert "config error: optimize needs [contacts]" in err

    def test_optimize_with_trajectory(self, tmp_path, capsys):
        toml = BASE_TOML + (
            "\n[contacts.trajectory]\nradius = 0.02\nstep = 0.005\n"
            "waypoints = [[0.075, 0.087, 0.1], [0.075, 0.087, -0.1]]\n")
        cfg = write_unit(tmp_path, toml)
        assert cli_main(["optimize", "--config", str(cfg)]) == 0
        report = json.loads((tmp_path / "out" / "unit1_report.json").read_text())
        assert report["optimized"] is True

    def test_bad_config_exits_2(self, tmp_path, capsys):
        assert cli_main(["generate", "--config",
                         str(tmp_path / "nope.toml")]) == 2
        assert "config error:" in capsys.readouterr().err

    def test_broken_geometry_exits_3(self, tmp_path, capsys):
        groove = v_groove(half_width=0.01, length=0.06, bands=6, rings=2)
        toml = BASE_TOML.replace('path = "plate.stl"', 'path = "groove.stl"') \
                        .replace("thickness = 0.003", "thickness = 0.015") \
                        .replace("minimum_distribution_distance = 0.05",
                                 "minimum_distribution_distance = 0.01")
        save_stl(groove, tmp_path / "groove.stl")
        cfg = tmp_path / "unit.toml"
        cfg.write_text(toml)
        assert cli_main(["generate", "--config", str(cfg)]) == 3
        assert "geometry error:" in capsys.readouterr().err

    def test_infeasible_chain_exits_4(self, tmp_path, capsys):
        # nothing on a 0.2 m plate can print 78 m of trace
        toml = BASE_TOML + ("\n[filament]\nmargin = 20000.0\n")
        cfg = write_unit(tmp_path, toml)
        assert cli_main(["generate", "--config", str(cfg)]) == 4
        assert "chain design error:" in capsys.readouterr().err

    def test_characterize(self, tmp_path, capsys):
        cfg = write_unit(tmp_path)
        assert cli_main(["generate", "--config", str(cfg)]) == 0
        capsys.readouterr()
        manifest = tmp_path / "out" / "unit1_manifest.json"
        body = tmp_path / "out" / "unit1_body.stl"
        out_json = tmp_path / "row.json"
        assert cli_main(["characterize", "--manifest", str(manifest),
                         "--body", str(body), "--json", str(out_json)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("unit | nodules | volume")
        row = json.loads(out_json.read_text())
        assert row["name"] == "unit1"

    def test_characterize_mutated_body_exits_2(self, tmp_path, capsys):
        cfg = write_unit(tmp_path)
        assert cli_main(["generate", "--config", str(cfg)]) == 0
        body = tmp_path / "out" / "unit1_body.stl"
        blob = bytearray(body.read_bytes())
        blob[100] ^= 0xFF
        body.write_bytes(bytes(blob))
        assert cli_main(["characterize", "--manifest",
                         str(tmp_path / "out" / "unit1_manifest.json"),
                         "--body", str(body)]) == 2

    def _trace(self, nid, mu_p):
        n = 91
        t = np.arange(n) / 10.0
        pressed = (t > 3.0) & (t <= 6.0)
        toggle = 90.0 + 20.0 * (np.arange(n) % 2)
        v = np.where(pressed, mu_p, toggle)
        return CaptureTrace(nodule_id=nid, times=t, values=v, rate_hz=10.0)

    def test_snr_verb(self, tmp_path, capsys):
        for trial, mu_p in (("t1", 180.0), ("t2", 190.0), ("t3", 190.0)):
            d = tmp_path / trial
            d.mkdir()
            for nid in (0, 1):
                write_trace(d / f"n{nid}.trace", self._trace(nid, mu_p))
        args = ["snr", "--unit", "link 1"]
        for trial in ("t1", "t2", "t3"):
            args += ["--trial", str(tmp_path / trial)]
        out_json = tmp_path / "snr.json"
        assert cli_main(args + ["--json", str(out_json)]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "link 1 | 8 | 9 | 9 | 8.7 ± 0.5"
        assert "classification: minimum" in out
        payload = json.loads(out_json.read_text())
        assert payload["aggregate"]["mean"] == pytest.approx(26.0 / 3.0)
        assert len(payload["trials"]) == 3

    def test_snr_empty_dir_exits_2(self, tmp_path, capsys):
        empty = tmp_path / "t1"
        empty.mkdir()
        assert cli_main(["snr", "--trial", str(empty)]) == 2
        assert "no .trace files" in capsys.readouterr().err
