import json

import numpy as np
import pytest
from click.testing import CliRunner

from conftest import make_scene
from derender.cli import main, parse_light_spec
from derender.fileio import load_pfm, save_image_png, save_pfm
from derender.manifest import load_coarse, save_decomposition


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def scene_dir(tmp_path):
    """A rendered scene on disk: input PNG, depth PFM and its decomposition."""
    image, dec, cfg = make_scene(size=32, a_spec=0.3, t_alpha=0.2)
    save_image_png(tmp_path / "image.png", image)
    save_pfm(tmp_path / "depth.pfm", np.asarray(dec.depth))
    save_decomposition(tmp_path / "dec", "scene", dec, cfg)
    return tmp_path, dec


def tree_bytes(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestParseLightSpec:
    def test_inline(self):
        light, alpha, a_spec = parse_light_spec("0.3,-0.2,0.35,0.5")
        assert light.s_amb == 0.35 and light.s_dir == 0.5
        assert alpha is None and a_spec is None

    def test_json_with_material(self):
        light, alpha, a_spec = parse_light_spec('{"x": 0, "y": 0, "s_amb": 0.2, "s_dir": 0.6, "alpha": 8, "a_spec": 0.3}')
        assert alpha == 8 and a_spec == 0.3

    def test_json_file(self, tmp_path):
        p = tmp_path / "light.json"
        p.write_text('{"x": 0.1, "y": 0.0, "s_amb": 0.3, "s_dir": 0.5}')
        light, _, _ = parse_light_spec(str(p))
        assert light.s_amb == 0.3

    def test_bad_inline(self):
        with pytest.raises(ValueError):
            parse_light_spec("1,2,3")


class TestEstimate:
    def test_recovers_light_from_rendered_scene(self, runner, scene_dir, tmp_path):
        root, dec = scene_dir
        result = runner.invoke(main, [
            "estimate", "--image", str(root / "image.png"), "--depth", str(root / "depth.pfm"),
            "--out-dir", str(tmp_path / "coarse"),
        ])
        assert result.exit_code == 0, result.output
        est, manifest = load_coarse(tmp_path / "coarse")
        assert manifest["id"] == "coarse"
        dot = np.clip(np.dot(est.l_c.l, dec.light.l), -1.0, 1.0)
        assert np.degrees(np.arccos(dot)) < 2.0

    def test_requires_exactly_one_geometry(self, runner, scene_dir, tmp_path):
        root, _ = scene_dir
        result = runner.invoke(main, [
            "estimate", "--image", str(root / "image.png"), "--out-dir", str(tmp_path / "c"),
        ])
        assert result.exit_code == 2
        result = runner.invoke(main, [
            "estimate", "--image", str(root / "image.png"),
            "--depth", str(root / "depth.pfm"), "--normals", str(root / "depth.pfm"),
            "--out-dir", str(tmp_path / "c"),
        ])
        assert result.exit_code == 2

    def test_malformed_input_exits_one(self, runner, tmp_path):
        bad = tmp_path / "bad.pfm"
        bad.write_bytes(b"nonsense")
        img = tmp_path / "i.png"
        save_image_png(img, np.zeros((8, 8, 3)))
        result = runner.invoke(main, [
            "estimate", "--image", str(img), "--depth", str(bad), "--out-dir", str(tmp_path / "c"),
        ])
        assert result.exit_code == 1
        assert "error:" in result.output


class TestRenderAndRelight:
    def test_relight_with_stored_light_matches_render(self, runner, scene_dir, tmp_path):
        root, dec = scene_dir
        r1 = runner.invoke(main, ["render", "--manifest", str(root / "dec"), "--out", str(tmp_path / "a.png")])
        assert r1.exit_code == 0, r1.output
        r2 = runner.invoke(main, [
            "relight", "--manifest", str(root / "dec"),
            "--light", "0.3,-0.2,0.35,0.5", "--out", str(tmp_path / "b.png"),
        ])
        assert r2.exit_code == 0, r2.output
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_zero_a_spec_gives_zero_specular_map(self, runner, tmp_path):
        image, dec, cfg = make_scene(size=16)
        save_decomposition(tmp_path / "dec", "s", dec, cfg)
        result = runner.invoke(main, [
            "render", "--manifest", str(tmp_path / "dec"),
            "--out", str(tmp_path / "o.png"), "--out-spec", str(tmp_path / "spec.pfm"),
        ])
        assert result.exit_code == 0, result.output
        np.testing.assert_array_equal(load_pfm(tmp_path / "spec.pfm"), 0.0)

    def test_relight_specular_override(self, runner, scene_dir, tmp_path):
        root, _ = scene_dir
        result = runner.invoke(main, [
            "relight", "--manifest", str(root / "dec"),
            "--light", '{"x": 0.3, "y": -0.2, "s_amb": 0.35, "s_dir": 0.5, "a_spec": 0.0}',
            "--out", str(tmp_path / "o.png"), "--out-spec", str(tmp_path / "spec.pfm"),
        ])
        assert result.exit_code == 0, result.output
        np.testing.assert_array_equal(load_pfm(tmp_path / "spec.pfm"), 0.0)

    def test_missing_manifest_exits_one(self, runner, tmp_path):
        (tmp_path / "empty").mkdir()
        result = runner.invoke(main, ["render", "--manifest", str(tmp_path / "empty"), "--out", str(tmp_path / "o.png")])
        assert result.exit_code == 1


class TestFit:
    def _estimate(self, runner, root, out):
        result = runner.invoke(main, [
            "estimate", "--image", str(root / "image.png"), "--depth", str(root / "depth.pfm"),
            "--out-dir", str(out),
        ])
        assert result.exit_code == 0, result.output

    def test_trace_has_one_row_per_iteration(self, runner, scene_dir, tmp_path):
        root, _ = scene_dir
        self._estimate(runner, root, tmp_path / "coarse")
        result = runner.invoke(main, [
            "fit", "--image", str(root / "image.png"), "--coarse-dir", str(tmp_path / "coarse"),
            "--out-dir", str(tmp_path / "fit"), "--iters", "5",
        ])
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "fit" / "trace.csv").read_text().strip().splitlines()
        assert lines[0] == "iteration,total,coarse,rec"
        assert len(lines) == 1 + 6

    def test_zero_iters_returns_coarse_albedo(self, runner, scene_dir, tmp_path):
        root, _ = scene_dir
        self._estimate(runner, root, tmp_path / "coarse")
        result = runner.invoke(main, [
            "fit", "--image", str(root / "image.png"), "--coarse-dir", str(tmp_path / "coarse"),
            "--out-dir", str(tmp_path / "fit"), "--iters", "0",
        ])
        assert result.exit_code == 0, result.output
        est, _ = load_coarse(tmp_path / "coarse")
        fitted = load_pfm(tmp_path / "fit" / "albedo.pfm")
        np.testing.assert_allclose(fitted, est.a_c, atol=1e-7)

    def test_pipeline_is_byte_deterministic(self, runner, scene_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        root, _ = scene_dir
        for run in ("one", "two"):
            self._estimate(runner, root, tmp_path / run / "coarse")
            result = runner.invoke(main, [
                "fit", "--image", str(root / "image.png"), "--coarse-dir", str(tmp_path / run / "coarse"),
                "--out-dir", str(tmp_path / run / "fit"), "--iters", "3", "--id", "fit",
            ])
            assert result.exit_code == 0, result.output
        a = tree_bytes(tmp_path / "one")
        b = tree_bytes(tmp_path / "two")
        assert list(a) == list(b)
        for k in a:
            assert a[k] == b[k], k


class TestEval:
    def test_identical_inputs_score_perfectly(self, runner, tmp_path):
        _, dec, _ = make_scene(size=16)
        save_pfm(tmp_path / "a.pfm", np.asarray(dec.material.albedo))
        save_pfm(tmp_path / "n.pfm", np.asarray(dec.normals))
        result = runner.invoke(main, [
            "eval", "--pred-albedo", str(tmp_path / "a.pfm"), "--gt-albedo", str(tmp_path / "a.pfm"),
            "--pred-normals", str(tmp_path / "n.pfm"), "--gt-normals", str(tmp_path / "n.pfm"),
            "--out", str(tmp_path / "metrics.json"),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "metrics.json").read_text())
        assert report["mse"] == 0.0
        assert report["l1"] == 0.0
        assert report["sie"] == 0.0
        # Normals pass through float32 on disk, so allow a few millidegrees.
        assert report["dia_degrees"] < 0.05
        assert report["ssim"] == pytest.approx(1.0)
        assert report["pixel_count"] == 256
