"""Fit a small scene, then exercise the HTTP relighting service in-process.

Demonstrates the same API the web client uses: list decompositions, fetch
the reconstruction PNG, and POST relight requests with new light settings.
"""

import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from derender.coarse import coarse_pipeline
from derender.fit import FitConfig, fit_decomposition
from derender.manifest import save_decomposition
from derender.rendering import (
    Decomposition,
    LightParams,
    MaterialParams,
    RenderConfig,
    alpha_from_raw,
    normals_from_depth,
    render,
)
from derender.service import create_app

OUT = Path(__file__).parent / "out" / "serve_and_relight"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    size = 48
    cfg = RenderConfig(gamma=1.0)
    yy, xx = np.mgrid[0:size, 0:size]
    r2 = np.clip(((xx - size / 2) ** 2 + (yy - size / 2) ** 2) / (size / 2) ** 2, 0, 1)
    depth = 1.1 - 0.2 * np.sqrt(1.0 - 0.9 * r2)
    normals = normals_from_depth(depth)
    light = LightParams.from_xy(0.3, 0.2, 0.3, 0.55)
    material = MaterialParams(albedo=np.full((size, size, 3), 0.5),
                              alpha=alpha_from_raw(0.5, cfg.alpha_max), a_spec=0.35)
    truth = Decomposition(depth=depth, normals=normals,
                          n_refine=np.broadcast_to([0.0, 0.0, 1.0], normals.shape).copy(),
                          material=material, light=light)
    image, _, _ = render(truth, light, cfg)

    fitted, _ = fit_decomposition(image, coarse_pipeline(image, depth),
                                  FitConfig(iters=200, render=cfg))

    with tempfile.TemporaryDirectory() as root:
        save_decomposition(Path(root) / "dome", "dome", fitted, cfg)
        client = TestClient(create_app(root))

        print("decompositions:", client.get("/api/decompositions").json())
        print("config:", client.get("/api/config/dome").json())

        recon = client.get("/api/decompositions/dome/image/recon")
        (OUT / "recon.png").write_bytes(recon.content)

        for name, body in {
            "identity": {"x": round(fitted.light.l[0] / fitted.light.l[2], 6),
                         "y": round(fitted.light.l[1] / fitted.light.l[2], 6),
                         "s_amb": fitted.light.s_amb, "s_dir": fitted.light.s_dir},
            "side": {"x": -0.8, "y": 0.0, "s_amb": 0.2, "s_dir": 0.7},
            "matte": {"x": 0.0, "y": 0.0, "s_amb": 0.5, "s_dir": 0.4, "a_spec": 0.0},
        }.items():
            r = client.post("/api/decompositions/dome/relight", json=body)
            (OUT / f"relight_{name}.png").write_bytes(r.content)
            print(f"relight {name}: {r.status_code}, {len(r.content)} bytes")

        bad = client.post("/api/decompositions/dome/relight",
                          json={"x": 2.0, "y": 0.0, "s_amb": 0.5, "s_dir": 0.5})
        print("out-of-range request ->", bad.status_code, bad.json())
    print(f"wrote results to {OUT}")


if __name__ == "__main__":
    main()
