"""Synthesize a shiny dome, de-render it, and re-light it from four angles.

Walks the full pipeline: render a ground-truth scene, run the coarse
light/albedo estimation from the image plus depth, fit the complete
decomposition, then render the fitted scene under new lights. Outputs land
in demos/out/decompose_and_relight/.
"""

from pathlib import Path

import numpy as np

from derender.coarse import coarse_pipeline
from derender.fileio import save_image_png
from derender.fit import FitConfig, fit_decomposition
from derender.losses import metric_sie
from derender.manifest import save_decomposition
from derender.rendering import (
    Decomposition,
    LightParams,
    MaterialParams,
    RenderConfig,
    alpha_from_raw,
    normals_from_depth,
    relight,
    render,
)

OUT = Path(__file__).parent / "out" / "decompose_and_relight"


def dome_depth(size):
    yy, xx = np.mgrid[0:size, 0:size]
    u = (xx - (size - 1) / 2) / (size / 2)
    v = (yy - (size - 1) / 2) / (size / 2)
    r2 = np.clip(u**2 + v**2, 0.0, 1.0)
    return 1.1 - 0.2 * np.sqrt(1.0 - 0.9 * r2)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    size = 64
    cfg = RenderConfig(gamma=1.0)

    depth = dome_depth(size)
    normals = normals_from_depth(depth)
    albedo = np.broadcast_to([0.55, 0.45, 0.5], (size, size, 3)).copy()
    light = LightParams.from_xy(0.4, -0.2, 0.3, 0.55)
    material = MaterialParams(albedo=albedo, alpha=alpha_from_raw(0.5, cfg.alpha_max), a_spec=0.4)
    truth = Decomposition(
        depth=depth,
        normals=normals,
        n_refine=np.broadcast_to([0.0, 0.0, 1.0], normals.shape).copy(),
        material=material,
        light=light,
    )
    image, _, _ = render(truth, light, cfg)
    save_image_png(OUT / "input.png", image)

    # The observer only gets the image and the depth map.
    coarse = coarse_pipeline(image, depth)
    print(f"coarse light: l={np.round(coarse.l_c.l, 3)} "
          f"s_amb={coarse.l_c.s_amb:.3f} s_dir={coarse.l_c.s_dir:.3f}")

    fitted, report = fit_decomposition(image, coarse, FitConfig(iters=500, render=cfg))
    rec = report.components[-1][2]
    angle = np.degrees(np.arccos(np.clip(np.dot(fitted.light.l, light.l), -1, 1)))
    sie = metric_sie(np.asarray(fitted.material.albedo), albedo)
    print(f"fit: reconstruction loss {rec:.2e}, light error {angle:.2f} deg, albedo SIE {sie:.2e}")

    save_decomposition(OUT / "decomposition", "dome", fitted, cfg)
    save_image_png(OUT / "albedo.png", np.clip(fitted.material.albedo, 0, 1))

    for name, (x, y) in {"left": (0.7, 0.0), "right": (-0.7, 0.0),
                         "top": (0.0, 0.7), "frontal": (0.0, 0.0)}.items():
        new_light = LightParams.from_xy(x, y, light.s_amb, light.s_dir)
        save_image_png(OUT / f"relit_{name}.png", relight(fitted, new_light, cfg))
    print(f"wrote results to {OUT}")


if __name__ == "__main__":
    main()
