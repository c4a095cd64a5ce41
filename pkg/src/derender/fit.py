"""Per-image decomposition fitting: directly optimize albedo, refinement
normals, light, and the global specular parameters of one image against the
coarse plus reconstruction objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import raster
from .coarse import CoarseEstimate
from .losses import LossWeights, reconstruction_loss_with_grad
from .optim import ObjectiveReport, OptimConfig, block_descent
from .raster import RasterError, as_mask
from .rendering import (
    Decomposition,
    LightParams,
    MaterialParams,
    RenderConfig,
    alpha_from_raw,
    alpha_from_raw_deriv,
    light_from_xy,
    light_from_xy_vjp,
    normalize_vjp,
    normals_from_depth,
    normals_from_depth_vjp,
    relight,
    render_vjp,
)


@dataclass
class FitConfig:
    iters: int = 500
    lr: float = 0.01
    weights: LossWeights = field(default_factory=LossWeights)
    render: RenderConfig = field(default_factory=RenderConfig)
    optimize_depth: bool = False  # False: depth stays at the coarse depth

    def __post_init__(self):
        if self.iters < 0 or self.lr <= 0:
            raise ValueError("iters must be >= 0 and lr positive")


@dataclass
class FitReport(ObjectiveReport):
    # Per-iteration (total, coarse, reconstruction) loss components at the
    # accepted point, aligned with ``trace``.
    components: list = field(default_factory=list)


def _xy_from_direction(l) -> tuple[float, float]:
    lx, ly, lz = l
    if lz <= 0:
        return 0.0, 0.0
    return float(np.clip(lx / lz, -1.0, 1.0)), float(np.clip(ly / lz, -1.0, 1.0))


class _FitProblem:
    """Flattened parameter vector plus the analytic value-and-gradient."""

    def __init__(self, i_in: np.ndarray, coarse: CoarseEstimate, cfg: FitConfig):
        self.cfg = cfg
        self.w = cfg.weights
        self.rcfg = cfg.render
        self.i_in = raster.as_image(i_in)
        H, W = self.i_in.shape[:2]
        self.shape = (H, W)

        n_c = np.asarray(coarse.n_c, dtype=np.float64)
        if n_c.shape[:2] != (H, W):
            n_c = raster.resample_normals(n_c, H, W)
        self.n_c = n_c
        valid = as_mask(coarse.valid)
        if valid.shape != (H, W):
            valid = raster.resample_mask(valid, H, W)
        self.valid = valid
        self.n_valid = int(valid.sum())
        if self.n_valid == 0:
            raise RasterError("fit needs at least one valid pixel")

        if coarse.a_c is None:
            raise RasterError("fit needs a coarse albedo estimate")
        a_c = np.asarray(coarse.a_c, dtype=np.float64)
        if a_c.shape[:2] != (H, W):
            a_c = np.clip(raster.resample(a_c, H, W, mode="bilinear"), 0.0, 1.0)
        self.a_c = a_c

        if coarse.l_c is None:
            raise RasterError("fit needs a coarse light estimate")
        self.l_c = coarse.l_c

        if coarse.d_c is not None:
            d_c = np.asarray(coarse.d_c, dtype=np.float64)
            if d_c.shape != (H, W):
                d_c = raster.resample(d_c, H, W, mode="bilinear")
            self.d_c = np.clip(d_c, self.rcfg.d_min, self.rcfg.d_max)
            self.n_d = normals_from_depth(self.d_c)
        else:
            # No coarse depth: hold a flat mid-range depth and take the coarse
            # normals as the base shape.
            self.d_c = np.full((H, W), (self.rcfg.d_min + self.rcfg.d_max) / 2.0)
            self.n_d = self.n_c
            if cfg.optimize_depth:
                raise RasterError("optimize_depth requires a coarse depth map")

        self.npix = H * W
        # Layout: albedo (3HW) | n_ref raw (3HW) | s_amb s_dir x y t_alpha
        # a_spec | optional depth (HW).
        self.n_map = 3 * self.npix
        size = 2 * self.n_map + 6 + (self.npix if cfg.optimize_depth else 0)
        self.size = size

    def init_params(self) -> np.ndarray:
        p = np.empty(self.size)
        p[: self.n_map] = self.a_c.ravel()
        n_ref0 = np.zeros((self.npix, 3))
        n_ref0[:, 2] = 1.0
        p[self.n_map : 2 * self.n_map] = n_ref0.ravel()
        x0, y0 = _xy_from_direction(self.l_c.l)
        a_mid = (self.rcfg.a_spec_min + self.rcfg.a_spec_max) / 2.0
        p[2 * self.n_map : 2 * self.n_map + 6] = [self.l_c.s_amb, self.l_c.s_dir, x0, y0, 0.0, a_mid]
        if self.cfg.optimize_depth:
            p[2 * self.n_map + 6 :] = self.d_c.ravel()
        return p

    def projection(self):
        lo = np.full(self.size, -np.inf)
        hi = np.full(self.size, np.inf)
        lo[: self.n_map] = 0.0
        hi[: self.n_map] = 1.0
        lo[2 * self.n_map : 2 * self.n_map + 5] = [0.0, 0.0, -1.0, -1.0, -1.0]
        hi[2 * self.n_map : 2 * self.n_map + 5] = [1.0, 1.0, 1.0, 1.0, 1.0]
        lo[2 * self.n_map + 5] = self.rcfg.a_spec_min
        hi[2 * self.n_map + 5] = self.rcfg.a_spec_max
        if self.cfg.optimize_depth:
            lo[2 * self.n_map + 6 :] = self.rcfg.d_min
            hi[2 * self.n_map + 6 :] = self.rcfg.d_max
        return lo, hi

    def unpack(self, params: np.ndarray):
        H, W = self.shape
        a = params[: self.n_map].reshape(H, W, 3)
        n_ref_raw = params[self.n_map : 2 * self.n_map].reshape(H, W, 3)
        s_amb, s_dir, x, y, t_alpha, a_spec = params[2 * self.n_map : 2 * self.n_map + 6]
        depth = params[2 * self.n_map + 6 :].reshape(H, W) if self.cfg.optimize_depth else self.d_c
        return a, n_ref_raw, float(s_amb), float(s_dir), float(x), float(y), float(t_alpha), float(a_spec), depth

    def decomposition(self, params: np.ndarray) -> Decomposition:
        a, n_ref_raw, s_amb, s_dir, x, y, t_alpha, a_spec, depth = self.unpack(params)
        n_ref = n_ref_raw / np.linalg.norm(n_ref_raw, axis=-1, keepdims=True)
        n_d = normals_from_depth(depth) if self.cfg.optimize_depth else self.n_d
        u = n_d + n_ref
        normals = u / np.linalg.norm(u, axis=-1, keepdims=True)
        light = LightParams(s_amb=s_amb, s_dir=s_dir, l=tuple(light_from_xy(x, y)))
        material = MaterialParams(albedo=a, alpha=alpha_from_raw(t_alpha, self.rcfg.alpha_max), a_spec=a_spec)
        return Decomposition(depth=depth, normals=normals, n_refine=n_ref, material=material, light=light)

    def blocks(self):
        # Scalars first so the light settles before the maps react to it.
        out = [
            slice(2 * self.n_map, 2 * self.n_map + 6),
            slice(self.n_map, 2 * self.n_map),
            slice(0, self.n_map),
        ]
        if self.cfg.optimize_depth:
            out.append(slice(2 * self.n_map + 6, self.size))
        return out

    def value_and_grad(self, params: np.ndarray):
        w = self.w
        a, n_ref_raw, s_amb, s_dir, x, y, t_alpha, a_spec, depth = self.unpack(params)
        n_ref = n_ref_raw / np.linalg.norm(n_ref_raw, axis=-1, keepdims=True)
        n_d = normals_from_depth(depth) if self.cfg.optimize_depth else self.n_d
        u = n_d + n_ref
        normals = u / np.linalg.norm(u, axis=-1, keepdims=True)
        l = light_from_xy(x, y)
        light = LightParams(s_amb=s_amb, s_dir=s_dir, l=tuple(l))
        alpha = alpha_from_raw(t_alpha, self.rcfg.alpha_max)
        material = MaterialParams(albedo=a, alpha=alpha, a_spec=a_spec)
        dec = Decomposition(depth=depth, normals=normals, n_refine=n_ref, material=material, light=light)

        image, _, _, vjp = render_vjp(dec, light, self.rcfg)
        rec, g_img = reconstruction_loss_with_grad(self.i_in, image)

        vm = self.valid
        nv = self.n_valid
        # Coarse terms (depth term is constant unless depth is optimized).
        c_depth = float(np.mean(np.abs(depth - self.d_c)[vm])) if w.lambda_d > 0 else 0.0
        c_norm = -float(np.mean(np.sum(normals * self.n_c, axis=-1)[vm]))
        c_alb = float(np.mean(np.sum(np.abs(a - self.a_c), axis=-1)[vm]))
        lvec = np.array([s_amb, s_dir, *l])
        ldiff = lvec - self.l_c.as_vector()
        c_light = float(ldiff @ ldiff)
        coarse_total = w.lambda_d * c_depth + w.lambda_n * c_norm + w.lambda_a * c_alb + w.lambda_l * c_light
        total = coarse_total + w.lambda_rec * rec

        g = vjp(w.lambda_rec * g_img)
        g_a = g["albedo"] + (w.lambda_a / nv) * np.sign(a - self.a_c) * vm[..., None]
        g_normals = g["normals"] - (w.lambda_n / nv) * self.n_c * vm[..., None]
        g_u = normalize_vjp(u, g_normals)
        g_nref_raw = normalize_vjp(n_ref_raw, g_u)
        g_samb = g["s_amb"] + 2.0 * w.lambda_l * ldiff[0]
        g_sdir = g["s_dir"] + 2.0 * w.lambda_l * ldiff[1]
        g_l = g["l"] + 2.0 * w.lambda_l * ldiff[2:]
        g_x, g_y = light_from_xy_vjp(x, y, g_l)
        g_t = g["alpha"] * alpha_from_raw_deriv(t_alpha, self.rcfg.alpha_max)

        grad = np.empty(self.size)
        grad[: self.n_map] = g_a.ravel()
        grad[self.n_map : 2 * self.n_map] = g_nref_raw.ravel()
        grad[2 * self.n_map : 2 * self.n_map + 6] = [g_samb, g_sdir, g_x, g_y, g_t, g["a_spec"]]
        if self.cfg.optimize_depth:
            g_depth = normals_from_depth_vjp(depth, g_u)
            g_depth += (w.lambda_d / nv) * np.sign(depth - self.d_c) * vm
            grad[2 * self.n_map + 6 :] = g_depth.ravel()
        return total, grad, (total, coarse_total, rec)


def fit_decomposition(i_in: np.ndarray, coarse: CoarseEstimate, cfg: FitConfig | None = None):
    """Fit a full decomposition of one image by blockwise descent.

    Initializes at the coarse estimate (albedo, light), a frontal refinement
    map, raw shininess 0 and mid-range specular intensity, then minimizes
    coarse_loss + lambda_rec * reconstruction_loss under box projections.
    The objective trace is non-increasing: each block update is only accepted
    when it does not increase the loss.

    Returns (Decomposition, FitReport); the report's ``components`` rows are
    (total, coarse, reconstruction) per iteration.
    """
    cfg = cfg or FitConfig()
    problem = _FitProblem(i_in, coarse, cfg)
    if cfg.iters == 0:
        params = problem.init_params()
        value, _, aux = problem.value_and_grad(params)
        report = FitReport(trace=[value], params=params, components=[aux])
        return problem.decomposition(params), report
    opt = OptimConfig(iters=cfg.iters, lr=cfg.lr, projection=problem.projection())
    base = block_descent(problem.value_and_grad, problem.init_params(), opt, problem.blocks())
    report = FitReport(trace=base.trace, params=base.params, converged=base.converged, components=base.aux)
    return problem.decomposition(base.params), report


def relight_after_fit(dec: Decomposition, new_light: LightParams, cfg: RenderConfig | None = None) -> np.ndarray:
    """Render a fitted decomposition under new lighting."""
    return relight(dec, new_light, cfg)
