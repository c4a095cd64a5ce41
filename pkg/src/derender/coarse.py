"""Coarse pseudo-supervision: fit a global light to the image brightness,
invert the Lambertian shading for an initial albedo, and refine that albedo
with total-variation regularization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import raster
from .optim import ObjectiveReport, OptimConfig, gradient_descent
from .raster import RasterError, as_mask, brightness_hsv, fill_sparse_nearest, sobel_gradients, sobel_gradients_adjoint
from .rendering import LightParams, light_from_xy, light_from_xy_vjp, normals_from_depth

SHADING_FLOOR = 0.05  # lower bound on the shading denominator when inverting
CHARBONNIER_KAPPA = 1e-3  # smoothing of the L1 gradient penalty
# The refinement weights are calibrated for the classic (unnormalized) Sobel
# kernels; sobel_gradients divides by 8, so the objective scales back up.
TV_KERNEL_SCALE = 8.0
MIN_VALID_PIXELS = 10
DEGENERATE_EIGENVALUE = 1e-4


@dataclass(frozen=True)
class CoarseConfig:
    iters: int = 100
    lr_light: float = 0.01
    lr_albedo: float = 0.04
    lambda_tv: float = 5.0

    # Published presets: faces vs generic objects with sparse geometry.
    @classmethod
    def face(cls) -> "CoarseConfig":
        return cls(lr_albedo=0.04, lambda_tv=5.0)

    @classmethod
    def object(cls) -> "CoarseConfig":
        return cls(lr_albedo=0.01, lambda_tv=20.0)


@dataclass
class CoarseEstimate:
    """Precomputed pseudo-supervision for one image."""

    n_c: np.ndarray  # coarse normals (H, W, 3)
    a_c: np.ndarray | None = None  # refined coarse albedo
    a_tilde: np.ndarray | None = None  # pre-refinement albedo
    l_c: LightParams | None = None
    d_c: np.ndarray | None = None  # coarse depth, when available
    valid: np.ndarray | None = None  # pixels where the geometry exists
    degenerate_light: bool = False

    def __post_init__(self):
        if self.valid is None:
            self.valid = np.ones(np.asarray(self.n_c).shape[:2], dtype=bool)


@dataclass
class LightFitResult:
    light: LightParams
    report: ObjectiveReport
    degenerate_direction: bool


def light_fit_objective(b: np.ndarray, n_c: np.ndarray, valid: np.ndarray):
    """Objective for the coarse light fit, with analytic gradient.

    Parameters are (s_amb, s_dir, x, y). The residual per valid pixel is
    2B - (s_amb + s_dir max(0, n . l)); the albedo brightness is fixed at
    1/2, hence the factor 2. The squared residual is averaged over valid
    pixels so the learning rate is resolution-independent.
    """
    b = np.asarray(b, dtype=np.float64)
    n = np.asarray(n_c, dtype=np.float64)
    valid = as_mask(valid, like=b)
    nv = n[valid]
    bv = b[valid]
    count = bv.size

    def objective(params):
        s_amb, s_dir, x, y = params
        l = light_from_xy(x, y)
        ndotl = nv @ l
        d = np.maximum(0.0, ndotl)
        e = 2.0 * bv - (s_amb + s_dir * d)
        value = float(np.mean(e**2))
        g_samb = -2.0 * np.mean(e)
        g_sdir = -2.0 * np.mean(e * d)
        lit = ndotl > 0.0
        g_l = (-2.0 * s_dir / count) * np.sum((e * lit)[:, None] * nv, axis=0)
        g_x, g_y = light_from_xy_vjp(x, y, g_l)
        return value, np.array([g_samb, g_sdir, g_x, g_y])

    return objective


def fit_coarse_light(b: np.ndarray, n_c: np.ndarray, valid: np.ndarray, cfg: CoarseConfig) -> LightFitResult:
    """Fit (s_amb, s_dir, l) so the Lambertian shading matches the image
    brightness over the valid pixels.

    The ambient/directional split is under-determined when the valid normals
    barely vary; those fits are flagged degenerate.
    """
    b = np.asarray(b, dtype=np.float64)
    if not np.all(np.isfinite(b)):
        raise RasterError("brightness map contains non-finite values")
    valid = as_mask(valid, like=b)
    if valid.sum() < MIN_VALID_PIXELS:
        raise RasterError(f"light fit needs at least {MIN_VALID_PIXELS} valid pixels")
    nv = np.asarray(n_c, dtype=np.float64)[valid]
    cov = np.cov(nv.T) if nv.shape[0] > 1 else np.zeros((3, 3))
    degenerate = bool(np.linalg.eigvalsh(cov).min() < DEGENERATE_EIGENVALUE)

    objective = light_fit_objective(b, n_c, valid)
    opt = OptimConfig(
        iters=cfg.iters,
        lr=cfg.lr_light,
        projection=(np.array([0.0, 0.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0, 1.0])),
        method="adam",
    )
    report = gradient_descent(objective, np.array([0.5, 0.5, 0.0, 0.0]), opt)
    s_amb, s_dir, x, y = report.params
    light = LightParams(s_amb=float(s_amb), s_dir=float(s_dir), l=tuple(light_from_xy(x, y)))
    return LightFitResult(light=light, report=report, degenerate_direction=degenerate)


def invert_albedo(img: np.ndarray, n_c: np.ndarray, l_c: LightParams, valid: np.ndarray | None = None) -> np.ndarray:
    """Initial albedo from inverting the Lambertian shading equation.

    The shading denominator is floored at 0.05 to bound noise amplification;
    the result is clamped to [0, 1] and invalid pixels are filled from their
    nearest valid neighbor.
    """
    img = np.asarray(img, dtype=np.float64)
    n = np.asarray(n_c, dtype=np.float64)
    l = np.asarray(l_c.l, dtype=np.float64)
    shading = l_c.s_amb + l_c.s_dir * np.maximum(0.0, np.tensordot(n, l, axes=([-1], [0])))
    shading = np.maximum(shading, SHADING_FLOOR)
    a = np.clip(img / shading[..., None], 0.0, 1.0)
    if valid is not None:
        valid = as_mask(valid, like=img)
        if not valid.all():
            a = np.stack([fill_sparse_nearest(a[..., c], valid) for c in range(3)], axis=-1)
    return a


def _charbonnier(g: np.ndarray) -> np.ndarray:
    return np.sqrt(g**2 + CHARBONNIER_KAPPA**2)


def total_variation(a: np.ndarray) -> float:
    """Sum of absolute Sobel gradients over all pixels and channels."""
    gx, gy = sobel_gradients(a)
    return float(np.sum(np.abs(gx)) + np.sum(np.abs(gy)))


def tv_refine_objective(a_tilde: np.ndarray, lambda_tv: float, valid: np.ndarray | None = None):
    """TV-refinement objective over a flattened albedo map, with gradient.

    Data term: squared L2 distance between the Sobel gradients of the
    candidate and of the initial albedo (restricted to valid pixels when a
    mask is given). Regularizer: Charbonnier-smoothed L1 of the candidate's
    gradients.
    """
    a_tilde = np.asarray(a_tilde, dtype=np.float64)
    gtx, gty = sobel_gradients(a_tilde)
    gtx = TV_KERNEL_SCALE * gtx
    gty = TV_KERNEL_SCALE * gty
    if valid is not None:
        vmask = as_mask(valid, like=a_tilde).astype(np.float64)[..., None]
    else:
        vmask = None
    shape = a_tilde.shape

    def objective(flat):
        a = flat.reshape(shape)
        gx, gy = sobel_gradients(a)
        gx = TV_KERNEL_SCALE * gx
        gy = TV_KERNEL_SCALE * gy
        rx = gx - gtx
        ry = gy - gty
        if vmask is not None:
            rx = rx * vmask
            ry = ry * vmask
        data = float(np.sum(rx**2) + np.sum(ry**2))
        cx = _charbonnier(gx)
        cy = _charbonnier(gy)
        tv = float(np.sum(cx) + np.sum(cy)) - 2.0 * gx.size * CHARBONNIER_KAPPA
        value = data + lambda_tv * tv
        gx_bar = 2.0 * rx * (vmask if vmask is not None else 1.0) + lambda_tv * gx / cx
        gy_bar = 2.0 * ry * (vmask if vmask is not None else 1.0) + lambda_tv * gy / cy
        grad = TV_KERNEL_SCALE * sobel_gradients_adjoint(gx_bar, gy_bar)
        return value, grad.ravel()

    return objective


def refine_albedo(
    a_tilde: np.ndarray,
    cfg: CoarseConfig,
    valid: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient-descent TV refinement of the initial albedo estimate."""
    a_tilde = np.asarray(a_tilde, dtype=np.float64)
    if a_tilde.min() < 0 or a_tilde.max() > 1:
        raise RasterError("albedo must lie in [0, 1]")
    objective = tv_refine_objective(a_tilde, cfg.lambda_tv, valid)
    opt = OptimConfig(iters=cfg.iters, lr=cfg.lr_albedo, projection=(0.0, 1.0), method="gd_ls")
    report = gradient_descent(objective, a_tilde.ravel(), opt)
    return report.params.reshape(a_tilde.shape)


def coarse_pipeline(
    img: np.ndarray,
    geometry: np.ndarray,
    valid: np.ndarray | None = None,
    cfg: CoarseConfig | None = None,
) -> CoarseEstimate:
    """Full coarse-estimation pass for one image.

    ``geometry`` is either a depth map (H, W) or a normal map (H, W, 3),
    possibly sparse (then ``valid`` marks the known pixels) and possibly at a
    lower resolution than the image; the image is downsampled to match.
    """
    cfg = cfg or CoarseConfig()
    img = raster.as_image(img)
    geometry = np.asarray(geometry, dtype=np.float64)
    gh, gw = geometry.shape[:2]
    if valid is None:
        valid = np.ones((gh, gw), dtype=bool)
    valid = as_mask(valid)
    if valid.shape != (gh, gw):
        raise RasterError("valid mask must match the geometry resolution")

    d_c = None
    if geometry.ndim == 2:
        depth = geometry
        if not valid.all():
            depth = fill_sparse_nearest(depth, valid)
        d_c = depth
        n_c = normals_from_depth(depth)
    elif geometry.ndim == 3 and geometry.shape[2] == 3:
        n_c = geometry
        if not valid.all():
            n_c = np.stack([fill_sparse_nearest(n_c[..., c], valid) for c in range(3)], axis=-1)
        n_c = raster.normalize_vectors(n_c)
    else:
        raise RasterError(f"geometry must be (H, W) depth or (H, W, 3) normals, got {geometry.shape}")

    if img.shape[:2] != (gh, gw):
        img_small = np.clip(raster.resample(img, gh, gw, mode="bilinear"), 0.0, 1.0)
    else:
        img_small = img

    b = brightness_hsv(img_small)
    light_fit = fit_coarse_light(b, n_c, valid, cfg)
    a_tilde = invert_albedo(img_small, n_c, light_fit.light, valid)
    a_c = refine_albedo(a_tilde, cfg, valid=None if valid.all() else valid)
    return CoarseEstimate(
        n_c=n_c,
        a_c=a_c,
        a_tilde=a_tilde,
        l_c=light_fit.light,
        d_c=d_c,
        valid=valid,
        degenerate_light=light_fit.degenerate_direction,
    )
