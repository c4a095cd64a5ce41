"""Forward image formation: normals from depth, normal refinement, Phong
shading with tone mapping, and the analytic gradients (VJPs) that the
optimizers rely on.

Conventions (camera frame): x-axis points left, y-axis points up, z-axis
points toward the viewer. The light direction points from the surface toward
the light source, and the view direction is fixed frontal by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import RasterError, as_normal_map, as_scalar_map


class RenderError(ValueError):
    """Raised for inconsistent rendering inputs."""


@dataclass(frozen=True)
class RenderConfig:
    gamma: float = 2.2
    view_dir: tuple[float, float, float] = (0.0, 0.0, 1.0)
    alpha_max: float = 64.0
    d_min: float = 0.9
    d_max: float = 1.1
    a_spec_min: float = 0.0
    a_spec_max: float = 0.5

    def __post_init__(self):
        if self.gamma <= 0:
            raise RenderError("gamma must be positive")
        v = np.asarray(self.view_dir, dtype=np.float64)
        if abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise RenderError("view_dir must be a unit vector")


@dataclass(frozen=True)
class LightParams:
    """Ambient/directional strengths plus a unit light direction."""

    s_amb: float
    s_dir: float
    l: tuple[float, float, float]

    def __post_init__(self):
        if not (0.0 <= self.s_amb <= 1.0 and 0.0 <= self.s_dir <= 1.0):
            raise RenderError("light strengths must lie in [0, 1]")
        l = np.asarray(self.l, dtype=np.float64)
        if abs(np.linalg.norm(l) - 1.0) > 1e-6:
            raise RenderError("light direction must be a unit vector")
        object.__setattr__(self, "l", tuple(float(x) for x in l))

    @classmethod
    def from_xy(cls, x: float, y: float, s_amb: float, s_dir: float) -> "LightParams":
        return cls(s_amb=s_amb, s_dir=s_dir, l=tuple(light_from_xy(x, y)))

    def as_vector(self) -> np.ndarray:
        """The (s_amb, s_dir, l_x, l_y, l_z) 5-vector used in light distances."""
        return np.array([self.s_amb, self.s_dir, *self.l], dtype=np.float64)


@dataclass
class MaterialParams:
    """Per-pixel albedo plus global shininess and specular intensity."""

    albedo: np.ndarray  # (H, W, 3) in [0, 1]
    alpha: float
    a_spec: float

    def validate(self, cfg: RenderConfig) -> None:
        a = np.asarray(self.albedo, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 3 or a.min() < 0 or a.max() > 1:
            raise RenderError("albedo must be (H, W, 3) in [0, 1]")
        if self.alpha < 1.0:
            raise RenderError("alpha must be >= 1")
        if not (cfg.a_spec_min <= self.a_spec <= cfg.a_spec_max):
            raise RenderError("a_spec outside its configured range")


@dataclass
class Decomposition:
    """A full de-rendered scene: shape, material and lighting."""

    depth: np.ndarray  # (H, W)
    normals: np.ndarray  # final combined normals (H, W, 3)
    n_refine: np.ndarray  # refinement normal map (H, W, 3)
    material: MaterialParams
    light: LightParams
    spec_refine: np.ndarray | None = None  # optional per-pixel specular multiplier

    def validate(self, cfg: RenderConfig) -> None:
        d = as_scalar_map(self.depth)
        if d.min() < cfg.d_min - 1e-9 or d.max() > cfg.d_max + 1e-9:
            raise RenderError(f"depth must lie in [{cfg.d_min}, {cfg.d_max}]")
        as_normal_map(self.normals)
        as_normal_map(self.n_refine)
        self.material.validate(cfg)
        if self.spec_refine is not None:
            as_scalar_map(self.spec_refine)


def pixel_spacing(h: int, w: int) -> float:
    """World-unit spacing between adjacent pixels: 1/max(H, W)."""
    return 1.0 / max(h, w)


def _depth_diffs(depth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences along columns (gx) and rows (gy); one-sided borders."""
    gx = np.empty_like(depth)
    gx[:, 1:-1] = (depth[:, 2:] - depth[:, :-2]) / 2.0
    gx[:, 0] = depth[:, 1] - depth[:, 0]
    gx[:, -1] = depth[:, -1] - depth[:, -2]
    gy = np.empty_like(depth)
    gy[1:-1, :] = (depth[2:, :] - depth[:-2, :]) / 2.0
    gy[0, :] = depth[1, :] - depth[0, :]
    gy[-1, :] = depth[-1, :] - depth[-2, :]
    return gx, gy


def _depth_diffs_adjoint(gx_bar: np.ndarray, gy_bar: np.ndarray) -> np.ndarray:
    out = np.zeros_like(gx_bar)
    out[:, 2:] += gx_bar[:, 1:-1] / 2.0
    out[:, :-2] -= gx_bar[:, 1:-1] / 2.0
    out[:, 1] += gx_bar[:, 0]
    out[:, 0] -= gx_bar[:, 0]
    out[:, -1] += gx_bar[:, -1]
    out[:, -2] -= gx_bar[:, -1]
    out[2:, :] += gy_bar[1:-1, :] / 2.0
    out[:-2, :] -= gy_bar[1:-1, :] / 2.0
    out[1, :] += gy_bar[0, :]
    out[0, :] -= gy_bar[0, :]
    out[-1, :] += gy_bar[-1, :]
    out[-2, :] -= gy_bar[-1, :]
    return out


def normals_from_depth(depth: np.ndarray) -> np.ndarray:
    """Per-pixel unit normals of the depth map's local tangent planes.

    The tangent plane at each pixel is spanned by finite differences over the
    4-neighborhood (one-sided at borders). Under the left/up/toward-viewer
    axes, the resulting normal is (-gx, -gy, h) normalized, with h the pixel
    spacing; n_z is always positive.
    """
    depth = as_scalar_map(depth)
    if depth.shape[0] < 2 or depth.shape[1] < 2:
        raise RasterError("normals_from_depth needs at least a 2x2 depth map")
    gx, gy = _depth_diffs(depth)
    h = pixel_spacing(*depth.shape)
    m = np.stack([-gx, -gy, np.full_like(depth, h)], axis=-1)
    return m / np.linalg.norm(m, axis=-1, keepdims=True)


def normals_from_depth_vjp(depth: np.ndarray, n_bar: np.ndarray) -> np.ndarray:
    """Backpropagate a normal-map cotangent to the depth map."""
    depth = as_scalar_map(depth)
    gx, gy = _depth_diffs(depth)
    h = pixel_spacing(*depth.shape)
    m = np.stack([-gx, -gy, np.full_like(depth, h)], axis=-1)
    norm = np.linalg.norm(m, axis=-1, keepdims=True)
    n = m / norm
    g_m = (n_bar - n * np.sum(n * n_bar, axis=-1, keepdims=True)) / norm
    return _depth_diffs_adjoint(-g_m[..., 0], -g_m[..., 1])


def combine_normals(n_d: np.ndarray, n_ref: np.ndarray, return_degenerate: bool = False):
    """Combine a depth normal map with a refinement map: normalize(n_d + n_ref).

    Antiparallel pairs have a zero sum; those pixels are reported degenerate
    and emitted as (0, 0, 1).
    """
    n_d = as_normal_map(n_d)
    n_ref = as_normal_map(n_ref)
    if n_d.shape != n_ref.shape:
        raise RenderError("normal maps must have equal shapes")
    s = n_d + n_ref
    norms = np.linalg.norm(s, axis=-1)
    degenerate = norms < 1e-12
    out = np.where(
        degenerate[..., None],
        np.array([0.0, 0.0, 1.0]),
        s / np.where(degenerate, 1.0, norms)[..., None],
    )
    if return_degenerate:
        return out, degenerate
    return out


def normalize_vjp(raw: np.ndarray, g_unit: np.ndarray) -> np.ndarray:
    """VJP of v -> v/||v|| along the last axis."""
    norm = np.linalg.norm(raw, axis=-1, keepdims=True)
    unit = raw / norm
    return (g_unit - unit * np.sum(unit * g_unit, axis=-1, keepdims=True)) / norm


def light_from_xy(x: float, y: float) -> np.ndarray:
    """Unit light direction from free (x, y) with the z component fixed at 1."""
    if not (-1.0 <= x <= 1.0 and -1.0 <= y <= 1.0):
        raise RenderError("light x, y must lie in [-1, 1]")
    w = np.array([x, y, 1.0])
    return w / np.linalg.norm(w)


def light_from_xy_vjp(x: float, y: float, g_l: np.ndarray) -> tuple[float, float]:
    w = np.array([x, y, 1.0])
    g_w = normalize_vjp(w, np.asarray(g_l, dtype=np.float64))
    return float(g_w[0]), float(g_w[1])


def alpha_from_raw(t: float, alpha_max: float) -> float:
    """Shininess from a raw value in [-1, 1]: ((t+1)/2 (a_max - 1) + 1)^2."""
    if not -1.0 <= t <= 1.0:
        raise RenderError("raw shininess must lie in [-1, 1]")
    b = (t + 1.0) / 2.0 * (alpha_max - 1.0) + 1.0
    return float(b * b)


def alpha_from_raw_deriv(t: float, alpha_max: float) -> float:
    b = (t + 1.0) / 2.0 * (alpha_max - 1.0) + 1.0
    return float(b * (alpha_max - 1.0))


def shade_diffuse(n: np.ndarray, l) -> np.ndarray:
    """Clamped Lambertian term max(0, n . l) per pixel."""
    l = np.asarray(l, dtype=np.float64)
    return np.maximum(0.0, np.tensordot(np.asarray(n, dtype=np.float64), l, axes=([-1], [0])))


def reflect(n: np.ndarray, l) -> np.ndarray:
    """Reflected light direction r = 2 (n . l) n - l."""
    l = np.asarray(l, dtype=np.float64)
    ndotl = np.tensordot(n, l, axes=([-1], [0]))
    return 2.0 * ndotl[..., None] * n - l


def shade_specular(n: np.ndarray, light, v, alpha: float) -> np.ndarray:
    """Phong specular base max(0, r . v)^alpha (the a_spec factor is the
    caller's responsibility)."""
    l = light.l if isinstance(light, LightParams) else light
    v = np.asarray(v, dtype=np.float64)
    r = reflect(np.asarray(n, dtype=np.float64), l)
    rv = np.maximum(0.0, np.tensordot(r, v, axes=([-1], [0])))
    return rv**alpha


def tone_map(img: np.ndarray, gamma: float = 2.2) -> np.ndarray:
    """Power-law tone mapping x^(1/gamma), clamped to [0, 1] afterwards."""
    img = np.asarray(img, dtype=np.float64)
    if img.min() < 0:
        raise RenderError("tone_map input must be non-negative")
    return np.minimum(1.0, img ** (1.0 / gamma))


def render(dec: Decomposition, light: LightParams, cfg: RenderConfig | None = None):
    """Render a decomposition under the given light.

    Returns (image, i_diff, i_spec) where i_diff = s_amb + s_dir max(0, n.l)
    and i_spec = s_dir a_spec max(0, r.v)^alpha are the un-tone-mapped shading
    maps (i_spec already includes the optional specular refinement
    multiplier). The composite is tone-mapped and clamped to [0, 1].
    """
    cfg = cfg or RenderConfig()
    n = np.asarray(dec.normals, dtype=np.float64)
    A = np.asarray(dec.material.albedo, dtype=np.float64)
    if n.shape != A.shape or n.shape[:2] != np.asarray(dec.depth).shape:
        raise RenderError("decomposition maps have inconsistent shapes")
    d = shade_diffuse(n, light.l)
    s = shade_specular(n, light.l, cfg.view_dir, dec.material.alpha)
    i_diff = light.s_amb + light.s_dir * d
    i_spec = light.s_dir * dec.material.a_spec * s
    if dec.spec_refine is not None:
        if np.asarray(dec.spec_refine).shape != i_spec.shape:
            raise RenderError("spec_refine shape mismatch")
        i_spec = i_spec * np.asarray(dec.spec_refine, dtype=np.float64)
    composite = A * i_diff[..., None] + i_spec[..., None]
    return tone_map(composite, cfg.gamma), i_diff, i_spec


def relight(dec: Decomposition, new_light: LightParams, cfg: RenderConfig | None = None) -> np.ndarray:
    """Render the decomposition under a new light, material unchanged."""
    return render(dec, new_light, cfg)[0]


def render_vjp(dec: Decomposition, light: LightParams, cfg: RenderConfig | None = None):
    """Render and return a VJP closure for the tone-mapped image.

    The closure maps an image cotangent to gradients with respect to the
    albedo map, the final normal map, (s_amb, s_dir), the light direction
    3-vector, shininess alpha, and a_spec.
    """
    cfg = cfg or RenderConfig()
    n = np.asarray(dec.normals, dtype=np.float64)
    A = np.asarray(dec.material.albedo, dtype=np.float64)
    l = np.asarray(light.l, dtype=np.float64)
    v = np.asarray(cfg.view_dir, dtype=np.float64)
    alpha = dec.material.alpha
    a_spec = dec.material.a_spec
    refine = None if dec.spec_refine is None else np.asarray(dec.spec_refine, dtype=np.float64)

    ndotl = np.tensordot(n, l, axes=([-1], [0]))
    d = np.maximum(0.0, ndotl)
    r = 2.0 * ndotl[..., None] * n - l
    rv = np.tensordot(r, v, axes=([-1], [0]))
    p = np.maximum(0.0, rv)
    s = p**alpha
    i_diff = light.s_amb + light.s_dir * d
    spec_base = a_spec * s if refine is None else a_spec * s * refine
    i_spec = light.s_dir * spec_base
    composite = A * i_diff[..., None] + i_spec[..., None]
    image = np.minimum(1.0, composite ** (1.0 / cfg.gamma))

    def vjp(g_img: np.ndarray) -> dict:
        # Tone map + clamp: zero gradient where the composite clipped at 1.
        with np.errstate(divide="ignore"):
            slope = np.where(
                (composite > 1e-300) & (composite <= 1.0),
                (1.0 / cfg.gamma) * composite ** (1.0 / cfg.gamma - 1.0),
                0.0,
            )
        g_c = np.asarray(g_img, dtype=np.float64) * slope

        g_A = g_c * i_diff[..., None]
        g_idiff = np.sum(g_c * A, axis=-1)
        g_ispec = np.sum(g_c, axis=-1)

        g_samb = float(np.sum(g_idiff))
        g_sdir = float(np.sum(g_idiff * d) + np.sum(g_ispec * spec_base))
        g_d = g_idiff * light.s_dir
        g_sb = g_ispec * light.s_dir
        if refine is None:
            g_aspec = float(np.sum(g_sb * s))
            g_s = g_sb * a_spec
        else:
            g_aspec = float(np.sum(g_sb * s * refine))
            g_s = g_sb * a_spec * refine

        pos = p > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            g_p = np.where(pos, g_s * alpha * p ** (alpha - 1.0), 0.0)
            g_alpha = float(np.sum(np.where(pos, g_s * s * np.log(np.where(pos, p, 1.0)), 0.0)))
        g_r = g_p[..., None] * v  # through max(0, r.v)
        # r = 2 (n.l) n - l
        g_n = 2.0 * (l * np.sum(g_r * n, axis=-1, keepdims=True) + ndotl[..., None] * g_r)
        g_l = 2.0 * np.sum(n * np.sum(g_r * n, axis=-1, keepdims=True), axis=(0, 1)) - np.sum(g_r, axis=(0, 1))
        # diffuse term
        lit = ndotl > 0.0
        g_n += np.where(lit[..., None], g_d[..., None] * l, 0.0)
        g_l += np.sum(np.where(lit[..., None], g_d[..., None] * n, 0.0), axis=(0, 1))
        return {
            "albedo": g_A,
            "normals": g_n,
            "s_amb": g_samb,
            "s_dir": g_sdir,
            "l": g_l,
            "alpha": g_alpha,
            "a_spec": g_aspec,
        }

    return image, i_diff, i_spec, vjp
