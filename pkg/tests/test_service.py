import pytest
from fastapi.testclient import TestClient

from conftest import make_scene
from derender.manifest import save_decomposition
from derender.service import create_app


@pytest.fixture
def served(tmp_path):
    image, dec, cfg = make_scene(size=16, a_spec=0.3, t_alpha=0.2)
    save_decomposition(tmp_path / "b", "scene-b", dec, cfg)
    image2, dec2, cfg2 = make_scene(size=16)
    save_decomposition(tmp_path / "a", "scene-a", dec2, cfg2)
    client = TestClient(create_app(tmp_path))
    return client, dec


class TestListing:
    def test_sorted_ids(self, served):
        client, _ = served
        r = client.get("/api/decompositions")
        assert r.status_code == 200
        assert r.json() == ["scene-a", "scene-b"]

    def test_manifest_lookup(self, served):
        client, _ = served
        r = client.get("/api/decompositions/scene-b")
        assert r.status_code == 200
        assert r.json()["id"] == "scene-b"

    def test_unknown_id_404(self, served):
        client, _ = served
        r = client.get("/api/decompositions/nope")
        assert r.status_code == 404
        assert "error" in r.json()

    def test_empty_root(self, tmp_path):
        client = TestClient(create_app(tmp_path))
        assert client.get("/api/decompositions").json() == []


class TestImages:
    def test_all_kinds_return_png(self, served):
        client, _ = served
        for kind in ("albedo", "normals", "diffuse", "specular", "recon"):
            r = client.get(f"/api/decompositions/scene-b/image/{kind}")
            assert r.status_code == 200, kind
            assert r.headers["content-type"] == "image/png"
            assert r.content.startswith(b"\x89PNG")

    def test_unknown_kind_404(self, served):
        client, _ = served
        assert client.get("/api/decompositions/scene-b/image/shadow").status_code == 404


class TestRelight:
    def test_stored_light_matches_recon_bytes(self, served):
        client, dec = served
        recon = client.get("/api/decompositions/scene-b/image/recon")
        # make_scene builds the light from (x, y) = (0.3, -0.2).
        body = {"x": 0.3, "y": -0.2, "s_amb": 0.35, "s_dir": 0.5}
        relit = client.post("/api/decompositions/scene-b/relight", json=body)
        assert relit.status_code == 200
        assert relit.content == recon.content

    def test_changing_light_changes_bytes(self, served):
        client, _ = served
        a = client.post("/api/decompositions/scene-b/relight", json={"x": 0.3, "y": -0.2, "s_amb": 0.35, "s_dir": 0.5})
        b = client.post("/api/decompositions/scene-b/relight", json={"x": -0.8, "y": 0.5, "s_amb": 0.1, "s_dir": 0.9})
        assert a.content != b.content

    def test_material_not_mutated_by_override(self, served):
        client, dec = served
        body = {"x": 0.3, "y": -0.2, "s_amb": 0.35, "s_dir": 0.5, "a_spec": 0.0, "alpha": 2.0}
        assert client.post("/api/decompositions/scene-b/relight", json=body).status_code == 200
        recon = client.get("/api/decompositions/scene-b/image/recon")
        stored = client.post("/api/decompositions/scene-b/relight", json={"x": 0.3, "y": -0.2, "s_amb": 0.35, "s_dir": 0.5})
        assert stored.content == recon.content

    def test_out_of_range_fields_are_named(self, served):
        client, _ = served
        r = client.post("/api/decompositions/scene-b/relight", json={"x": 1.5, "y": 0.0, "s_amb": 2.0, "s_dir": 0.5})
        assert r.status_code == 400
        fields = {e["field"] for e in r.json()["errors"]}
        assert fields == {"x", "s_amb"}
        for e in r.json()["errors"]:
            assert e["message"]

    def test_missing_field_is_named(self, served):
        client, _ = served
        r = client.post("/api/decompositions/scene-b/relight", json={"x": 0.0, "y": 0.0, "s_amb": 0.5})
        assert r.status_code == 400
        assert {e["field"] for e in r.json()["errors"]} == {"s_dir"}

    def test_alpha_above_range_rejected(self, served):
        client, _ = served
        r = client.post(
            "/api/decompositions/scene-b/relight",
            json={"x": 0.0, "y": 0.0, "s_amb": 0.5, "s_dir": 0.5, "alpha": 5000.0},
        )
        assert r.status_code == 400
        assert r.json()["errors"][0]["field"] == "alpha"

    def test_a_spec_above_range_rejected(self, served):
        client, _ = served
        r = client.post(
            "/api/decompositions/scene-b/relight",
            json={"x": 0.0, "y": 0.0, "s_amb": 0.5, "s_dir": 0.5, "a_spec": 0.9},
        )
        assert r.status_code == 400
        assert r.json()["errors"][0]["field"] == "a_spec"

    def test_unknown_id_404(self, served):
        client, _ = served
        r = client.post("/api/decompositions/ghost/relight", json={"x": 0, "y": 0, "s_amb": 0.5, "s_dir": 0.5})
        assert r.status_code == 404


class TestConfig:
    def test_ranges(self, served):
        client, _ = served
        r = client.get("/api/config/scene-b")
        assert r.status_code == 200
        assert r.json() == {"alpha_range": [1.0, 4096.0], "a_spec_range": [0.0, 0.5]}

    def test_unknown_id(self, served):
        client, _ = served
        assert client.get("/api/config/ghost").status_code == 404
