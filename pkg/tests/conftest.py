import numpy as np
import pytest

from derender.rendering import (
    Decomposition,
    LightParams,
    MaterialParams,
    RenderConfig,
    alpha_from_raw,
    normals_from_depth,
    render,
)


def hemisphere_normals(size=32, radius=0.95):
    """Unit hemisphere normals on a disk mask, frontal elsewhere.

    Axes follow the renderer: x points left, y points up, z toward the viewer.
    """
    yy, xx = np.mgrid[0:size, 0:size]
    u = (xx - (size - 1) / 2) / ((size - 1) / 2)
    v = (yy - (size - 1) / 2) / ((size - 1) / 2)
    r2 = u**2 + v**2
    mask = r2 < radius
    n = np.zeros((size, size, 3))
    n[..., 0] = -u
    n[..., 1] = -v
    n[..., 2] = np.sqrt(np.clip(1.0 - r2, 0.0, None))
    n[mask] /= np.linalg.norm(n[mask], axis=-1, keepdims=True)
    n[~mask] = [0.0, 0.0, 1.0]
    return n, mask


def dome_depth(size=64):
    """Smooth dome depth map inside the renderer's [0.9, 1.1] depth range."""
    yy, xx = np.mgrid[0:size, 0:size]
    u = (xx - (size - 1) / 2) / (size / 2)
    v = (yy - (size - 1) / 2) / (size / 2)
    r2 = np.clip(u**2 + v**2, 0.0, 1.0)
    return 1.1 - 0.2 * np.sqrt(1.0 - 0.9 * r2)


def make_scene(size=64, light_xy=(0.3, -0.2), strengths=(0.35, 0.5),
               albedo_color=(0.5, 0.45, 0.55), a_spec=0.0, t_alpha=0.0,
               gamma=1.0):
    """Synthesize (image, ground-truth Decomposition, RenderConfig)."""
    cfg = RenderConfig(gamma=gamma)
    depth = dome_depth(size)
    normals = normals_from_depth(depth)
    albedo = np.broadcast_to(np.asarray(albedo_color, dtype=float), (size, size, 3)).copy()
    light = LightParams.from_xy(light_xy[0], light_xy[1], strengths[0], strengths[1])
    material = MaterialParams(albedo=albedo, alpha=alpha_from_raw(t_alpha, cfg.alpha_max), a_spec=a_spec)
    n_refine = np.broadcast_to([0.0, 0.0, 1.0], normals.shape).copy()
    dec = Decomposition(depth=depth, normals=normals, n_refine=n_refine, material=material, light=light)
    image, i_diff, i_spec = render(dec, light, cfg)
    return image, dec, cfg


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
