import json
import time

import numpy as np
import pytest

from descforge.cli import main
from descforge.mesh import load_mesh
from descforge.scene import load_dataset


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A torus mesh, its gisif embedding, and a small rendered dataset."""
    root = tmp_path_factory.mktemp("cli")
    mesh = root / "torus.ply"
    assert main(["gen-mesh", "torus", "--out", str(mesh), "--n", "48", "--m", "24"]) == 0
    emb = root / "emb"
    assert main(["embed", "--mesh", str(mesh), "--dim", "3",
                 "--symmetry", "gisif", "--out", str(emb)]) == 0
    ds = root / "ds"
    assert main(["render", "--mesh", str(mesh), "--field", str(emb / "field.dfld"),
                 "--out", str(ds), "--frames", "3", "--seed", "5",
                 "--width", "320", "--height", "240", "--fx", "280", "--fy", "280",
                 "--cx", "160", "--cy", "120"]) == 0
    return root


class TestGenMesh:
    def test_torus_counts(self, tmp_path, capsys):
        out = tmp_path / "t.ply"
        assert main(["gen-mesh", "torus", "--out", str(out),
                     "--n", "64", "--m", "32"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["n_vertices"] == 2048
        mesh = load_mesh(out)
        chi = mesh.n_vertices - len(mesh.edges_unique()) + mesh.n_faces
        assert chi == 0

    def test_box_euler(self, tmp_path):
        out = tmp_path / "b.obj"
        assert main(["gen-mesh", "box", "--out", str(out)]) == 0
        mesh = load_mesh(out)
        assert mesh.n_vertices - len(mesh.edges_unique()) + mesh.n_faces == 2

    def test_bad_segments_argument_error(self, tmp_path, capsys):
        rc = main(["gen-mesh", "torus", "--out", str(tmp_path / "x.ply"), "--n", "2"])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ValueError"

    def test_unknown_shape_exits_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gen-mesh", "cone", "--out", str(tmp_path / "x.ply")])
        assert exc.value.code == 2
        assert json.loads(capsys.readouterr().err)["error"] == "ArgumentError"


class TestEmbed:
    def test_outputs_exist(self, workspace):
        emb = workspace / "emb"
        assert (emb / "field.dfld").exists()
        assert (emb / "spectrum.json").exists()
        assert (emb / "preview.png").exists()

    def test_gisif_report_groups_pairs(self, workspace):
        report = json.loads((workspace / "emb" / "spectrum.json").read_text())
        groups = report["groups"]
        assert groups[0] == {"start": 1, "end": 2, "length": 2}
        assert groups[1] == {"start": 3, "end": 4, "length": 2}
        assert len(report["background"]) == 3

    def test_dim_zero_argument_error(self, workspace, capsys):
        rc = main(["embed", "--mesh", str(workspace / "torus.ply"),
                   "--dim", "0", "--out", str(workspace / "bad")])
        assert rc == 2
        capsys.readouterr()

    def test_data_error_exit_3(self, tmp_path, capsys):
        # two disjoint components: MultiComponent is a data error
        from conftest import TETRA_OBJ
        second = TETRA_OBJ.replace("v 1.0", "v 9.0").replace("v -1.0", "v 7.0")
        lines = [ln for ln in second.splitlines() if ln.startswith("v")]
        merged = TETRA_OBJ + "\n".join(lines) + "\nf 5 7 6\nf 5 6 8\nf 5 8 7\nf 6 7 8\n"
        path = tmp_path / "two.obj"
        path.write_text(merged)
        rc = main(["embed", "--mesh", str(path), "--dim", "2",
                   "--out", str(tmp_path / "emb")])
        assert rc == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "MultiComponent"


class TestRender:
    def test_dataset_layout(self, workspace):
        ds = load_dataset(workspace / "ds")
        assert len(ds) == 3
        for i in range(3):
            frame = ds.frame(i)
            assert frame.mask.any()
            assert frame.descriptors.shape == (240, 320, 3)
            assert np.array_equal(frame.mask, frame.depth > 0)
        for name in ("rgb_00000.png", "depth_00002.png", "mask_00001.png",
                     "desc_00000.dimg", "preview_00002.png", "scene.json"):
            assert (workspace / "ds" / name).exists()

    def test_view_dependent_flags(self, workspace, tmp_path):
        for mode in ("edge-blend", "mask-ramp"):
            out = tmp_path / mode
            rc = main(["render", "--mesh", str(workspace / "torus.ply"),
                       "--field", str(workspace / "emb" / "field.dfld"),
                       "--out", str(out), "--frames", "1", "--seed", "2",
                       "--width", "160", "--height", "120", "--fx", "140",
                       "--fy", "140", "--cx", "80", "--cy", "60",
                       "--view-dependent", mode])
            assert rc == 0
            meta = json.loads((out / "scene.json").read_text())
            assert meta["descriptor"]["view_dependent"] == mode.replace("-", "_")
        ramp_meta = json.loads((tmp_path / "mask-ramp" / "scene.json").read_text())
        assert ramp_meta["descriptor"]["background"][-1] == 0.0


class TestCorrespondences:
    def test_jsonl_and_loss(self, workspace, capsys):
        out = workspace / "corr.jsonl"
        rc = main(["correspondences", "--dataset", str(workspace / "ds"),
                   "--frame-a", "0", "--frame-b", "1", "--n-match", "80",
                   "--n-nonmatch", "40", "--seed", "3", "--out", str(out)])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_matches"] == 80
        assert payload["n_non_matches"] == 40
        assert payload["loss"]["match_loss"] < 1e-3
        assert len(out.read_text().splitlines()) == 120


class TestEval:
    def test_summary_and_files(self, workspace, capsys):
        out = workspace / "eval"
        rc = main(["eval", "--dataset", str(workspace / "ds"), "--out", str(out),
                   "--num-refs", "6", "--seed", "4"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["pooled"]["count"] > 0
        for name in ("tracking.csv", "summary.json", "histogram.csv", "histogram.png"):
            assert (out / name).exists()

    def test_explicit_pixels_self_track(self, workspace, capsys):
        ds = load_dataset(workspace / "ds")
        image = ds.frame(0)
        vs, us = np.nonzero(image.mask & (image.depth > 0))
        pix = f"{us[10]},{vs[10]};{us[200]},{vs[200]}"
        out = workspace / "eval_px"
        rc = main(["eval", "--dataset", str(workspace / "ds"), "--out", str(out),
                   "--ref-pixels", pix, "--seed", "0"])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        # frame 0 is the reference frame: those rows must be exact hits
        rows = (out / "tracking.csv").read_text().splitlines()[1:]
        frame0 = [r for r in rows if r.split(",")[1] == "0"]
        for row in frame0:
            assert float(row.split(",")[5]) == 0.0
        capsys.readouterr()

    def test_empty_refs_argument_error(self, workspace, capsys):
        rc = main(["eval", "--dataset", str(workspace / "ds"),
                   "--out", str(workspace / "eval_bad"), "--num-refs", "0"])
        assert rc == 2
        capsys.readouterr()


class TestGrasp:
    def test_axis_grasp_output(self, workspace, capsys):
        ds = load_dataset(workspace / "ds")
        image = ds.frame(0)
        vs, us = np.nonzero(image.mask & (image.depth > 0))
        p1 = f"{us[50]},{vs[50]}"
        p2 = f"{us[-50]},{vs[-50]}"
        out = workspace / "grasp.json"
        rc = main(["grasp", "--dataset", str(workspace / "ds"),
                   "--pixel-1", p1, "--pixel-2", p2,
                   "--target-frame", "1", "--out", str(out)])
        capsys.readouterr()
        assert rc == 0
        payload = json.loads(out.read_text())
        rot = np.asarray(payload["rotation"])
        assert np.abs(rot.T @ rot - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(rot) - 1) < 1e-9

    def test_top_down_output(self, workspace, capsys):
        ds = load_dataset(workspace / "ds")
        image = ds.frame(0)
        vs, us = np.nonzero(image.mask & (image.depth > 0))
        out = workspace / "top.json"
        rc = main(["grasp", "--dataset", str(workspace / "ds"), "--top-down",
                   "--pixel-1", f"{us[30]},{vs[30]}", "--target-frame", "2",
                   "--out", str(out)])
        capsys.readouterr()
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["mode"] == "top_down"
        assert len(payload["point"]) == 3

    def test_missing_pixel_2(self, workspace, capsys):
        rc = main(["grasp", "--dataset", str(workspace / "ds"),
                   "--pixel-1", "1,1", "--out", str(workspace / "g.json")])
        assert rc == 2
        capsys.readouterr()


class TestConfigFile:
    def test_toml_defaults_and_flag_override(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text('[gen-mesh]\nn = 16\nm = 8\nmajor = 0.2\n')
        out = tmp_path / "cfg_torus.ply"
        rc = main(["--config", str(cfg), "gen-mesh", "torus",
                   "--out", str(out), "--m", "10"])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["n_vertices"] == 16 * 10  # n from config, m from the flag

    def test_threads_env_validation(self, monkeypatch, tmp_path, capsys):
        monkeypatch.setenv("DESCFORGE_THREADS", "zero")
        rc = main(["gen-mesh", "box", "--out", str(tmp_path / "b.obj")])
        assert rc == 2
        capsys.readouterr()


class TestPerformanceBudget:
    def test_cylinder_orbit_500_frames_under_60s(self, tmp_path, capsys):
        mesh = tmp_path / "cyl.ply"
        assert main(["gen-mesh", "cylinder", "--out", str(mesh),
                     "--radius", "0.03", "--height", "0.1",
                     "--n", "48", "--m", "12"]) == 0
        emb = tmp_path / "emb"
        assert main(["embed", "--mesh", str(mesh), "--dim", "3",
                     "--symmetry", "gisif", "--out", str(emb)]) == 0
        capsys.readouterr()
        start = time.monotonic()
        rc = main(["render", "--mesh", str(mesh), "--field", str(emb / "field.dfld"),
                   "--out", str(tmp_path / "big"), "--frames", "500", "--seed", "1"])
        elapsed = time.monotonic() - start
        capsys.readouterr()
        assert rc == 0
        assert elapsed < 60.0, f"500-frame render took {elapsed:.1f} s"
        assert (tmp_path / "big" / "rgb_00499.png").exists()
