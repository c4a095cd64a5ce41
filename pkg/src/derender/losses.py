"""Loss terms (coarse, reconstruction, adversarial), the random-light
sampler, and the evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .raster import RasterError, as_mask, resample, resample_mask, resample_normals
from .rendering import LightParams

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class LossWeights:
    lambda_d: float = 0.5
    lambda_n: float = 1.0
    lambda_a: float = 1.0
    lambda_l: float = 1.0  # 0 for very sparse geometry (object preset)
    lambda_rec: float = 0.5
    lambda_gan: float = 0.01

    def __post_init__(self):
        if min(self.lambda_d, self.lambda_n, self.lambda_a, self.lambda_l, self.lambda_rec, self.lambda_gan) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class LightSampleConfig:
    sigma_l: float = 1.0
    strength_sigma: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma_l <= 0 or self.strength_sigma <= 0:
            raise ValueError("sigmas must be positive")


@dataclass
class MetricReport:
    mse: float
    l1: float
    dia_degrees: float
    sie: float
    ssim: float
    pixel_count: int

    def to_json_dict(self) -> dict:
        return {
            "mse": self.mse,
            "l1": self.l1,
            "dia_degrees": self.dia_degrees,
            "sie": self.sie,
            "ssim": self.ssim,
            "pixel_count": self.pixel_count,
        }


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


_WINDOW = _gaussian_window()


def _valid_correlate(m: np.ndarray, w: np.ndarray) -> np.ndarray:
    r = (w.shape[0] - 1) // 2
    full = correlate(m, w, mode="constant", cval=0.0)
    return full[r:-r, r:-r]


def _valid_correlate_adjoint(g: np.ndarray, w: np.ndarray, shape) -> np.ndarray:
    r = (w.shape[0] - 1) // 2
    padded = np.zeros(shape, dtype=np.float64)
    padded[r:-r, r:-r] = g
    # The window is symmetric, so the adjoint is correlation again.
    return correlate(padded, w, mode="constant", cval=0.0)


def _ssim_channel(x: np.ndarray, y: np.ndarray, grad: bool = False):
    """Mean SSIM of one channel over all fully-covered window positions.

    Optionally also returns d(mean SSIM)/dx.
    """
    w = _WINDOW
    mu_x = _valid_correlate(x, w)
    mu_y = _valid_correlate(y, w)
    mxx = _valid_correlate(x * x, w)
    myy = _valid_correlate(y * y, w)
    mxy = _valid_correlate(x * y, w)
    var_x = mxx - mu_x**2
    var_y = myy - mu_y**2
    cov = mxy - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + SSIM_C1
    a2 = 2.0 * cov + SSIM_C2
    b1 = mu_x**2 + mu_y**2 + SSIM_C1
    b2 = var_x + var_y + SSIM_C2
    s = (a1 * a2) / (b1 * b2)
    value = float(s.mean())
    if not grad:
        return value
    npix = s.size
    d_a1 = a2 / (b1 * b2)
    d_a2 = a1 / (b1 * b2)
    d_b1 = -a1 * a2 / (b1**2 * b2)
    d_b2 = -a1 * a2 / (b1 * b2**2)
    g_mu_x = 2.0 * mu_y * d_a1 - 2.0 * mu_y * d_a2 + 2.0 * mu_x * d_b1 - 2.0 * mu_x * d_b2
    g_mxx = d_b2
    g_mxy = 2.0 * d_a2
    gx = (
        _valid_correlate_adjoint(g_mu_x, w, x.shape)
        + 2.0 * x * _valid_correlate_adjoint(g_mxx, w, x.shape)
        + y * _valid_correlate_adjoint(g_mxy, w, x.shape)
    ) / npix
    return value, gx


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5), per channel, averaged."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise RasterError("ssim inputs must have equal shapes")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise RasterError(f"ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images")
    if a.ndim == 2:
        return _ssim_channel(a, b)
    return float(np.mean([_ssim_channel(a[..., c], b[..., c]) for c in range(a.shape[2])]))


def ssim_with_grad(a: np.ndarray, b: np.ndarray):
    """SSIM plus its gradient with respect to the first argument."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        return _ssim_channel(a, b, grad=True)
    vals, grads = [], np.zeros_like(a)
    for c in range(a.shape[2]):
        v, g = _ssim_channel(a[..., c], b[..., c], grad=True)
        vals.append(v)
        grads[..., c] = g / a.shape[2]
    return float(np.mean(vals)), grads


def reconstruction_loss(i_in: np.ndarray, i_hat: np.ndarray) -> float:
    """Mean absolute error plus half the SSIM dissimilarity."""
    i_in = np.asarray(i_in, dtype=np.float64)
    i_hat = np.asarray(i_hat, dtype=np.float64)
    if i_in.shape != i_hat.shape:
        raise RasterError("reconstruction_loss inputs must have equal shapes")
    return float(np.mean(np.abs(i_in - i_hat)) + 0.5 * (1.0 - ssim(i_in, i_hat)))


def reconstruction_loss_with_grad(i_in: np.ndarray, i_hat: np.ndarray):
    """Reconstruction loss and its gradient with respect to i_hat."""
    i_in = np.asarray(i_in, dtype=np.float64)
    i_hat = np.asarray(i_hat, dtype=np.float64)
    s, gs = ssim_with_grad(i_hat, i_in)
    l1 = float(np.mean(np.abs(i_in - i_hat)))
    grad = np.sign(i_hat - i_in) / i_hat.size - 0.5 * gs
    return l1 + 0.5 * (1.0 - s), grad


def coarse_loss(dec, coarse, w: LossWeights) -> float:
    """Pseudo-supervision loss against the coarse estimate.

    Per-pixel terms are averaged over valid pixels; the light distance is the
    squared Euclidean distance between (s_amb, s_dir, l) 5-vectors. Coarse
    maps at a lower resolution are upsampled to the prediction resolution.
    """
    H, W = np.asarray(dec.normals).shape[:2]
    n_c = np.asarray(coarse.n_c, dtype=np.float64)
    if n_c.shape[:2] != (H, W):
        n_c = resample_normals(n_c, H, W)
    valid = as_mask(coarse.valid)
    if valid.shape != (H, W):
        valid = resample_mask(valid, H, W)
    if not valid.any():
        raise RasterError("coarse_loss requires at least one valid pixel")

    total = 0.0
    if w.lambda_d > 0:
        if coarse.d_c is None:
            raise RasterError("lambda_d > 0 but the coarse estimate has no depth")
        d_c = np.asarray(coarse.d_c, dtype=np.float64)
        if d_c.shape != (H, W):
            d_c = resample(d_c, H, W, mode="bilinear")
        total += w.lambda_d * float(np.mean(np.abs(np.asarray(dec.depth) - d_c)[valid]))
    if w.lambda_n > 0:
        dots = np.sum(np.asarray(dec.normals) * n_c, axis=-1)
        total += -w.lambda_n * float(np.mean(dots[valid]))
    if w.lambda_a > 0:
        if coarse.a_c is None:
            raise RasterError("lambda_a > 0 but the coarse estimate has no albedo")
        a_c = np.asarray(coarse.a_c, dtype=np.float64)
        if a_c.shape[:2] != (H, W):
            a_c = resample(a_c, H, W, mode="bilinear")
        per_pixel = np.sum(np.abs(np.asarray(dec.material.albedo) - a_c), axis=-1)
        total += w.lambda_a * float(np.mean(per_pixel[valid]))
    if w.lambda_l > 0:
        if coarse.l_c is None:
            raise RasterError("lambda_l > 0 but the coarse estimate has no light")
        diff = dec.light.as_vector() - coarse.l_c.as_vector()
        total += w.lambda_l * float(np.dot(diff, diff))
    return total


def lsgan_losses(real_scores, fake_scores) -> tuple[float, float]:
    """Least-squares GAN losses over caller-supplied discriminator scores."""
    real = np.asarray(real_scores, dtype=np.float64)
    fake = np.asarray(fake_scores, dtype=np.float64)
    if real.size == 0 or fake.size == 0:
        raise ValueError("lsgan_losses needs non-empty score lists")
    d_loss = float(np.mean((real - 1.0) ** 2) + np.mean(fake**2))
    g_loss = float(np.mean((1.0 - fake) ** 2))
    return d_loss, g_loss


def sample_random_light(batch_lights, cfg: LightSampleConfig, rng: np.random.Generator | None = None) -> LightParams:
    """Draw a random relighting light around the batch statistics.

    Direction: x', y' ~ N(0, sigma_l) with z fixed at 1, then normalized.
    Strengths: Gaussian around the batch means with std 0.1, clamped to [0, 1].
    """
    if len(batch_lights) == 0:
        raise ValueError("sample_random_light needs a non-empty batch")
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    x, y = rng.normal(0.0, cfg.sigma_l, size=2)
    mu_amb = float(np.mean([lp.s_amb for lp in batch_lights]))
    mu_dir = float(np.mean([lp.s_dir for lp in batch_lights]))
    s_amb = float(np.clip(rng.normal(mu_amb, cfg.strength_sigma), 0.0, 1.0))
    s_dir = float(np.clip(rng.normal(mu_dir, cfg.strength_sigma), 0.0, 1.0))
    w = np.array([x, y, 1.0])
    return LightParams(s_amb=s_amb, s_dir=s_dir, l=tuple(w / np.linalg.norm(w)))


def _masked(values: np.ndarray, mask) -> np.ndarray:
    mask = as_mask(mask, like=values)
    if not mask.any():
        raise RasterError("empty mask")
    return values[mask]


def metric_dia(n_pred: np.ndarray, n_gt: np.ndarray, mask=None) -> float:
    """Mean angle between normal maps, in degrees."""
    n_pred = np.asarray(n_pred, dtype=np.float64)
    n_gt = np.asarray(n_gt, dtype=np.float64)
    if n_pred.shape != n_gt.shape:
        raise RasterError("metric_dia inputs must have equal shapes")
    dots = np.clip(np.sum(n_pred * n_gt, axis=-1), -1.0, 1.0)
    if mask is None:
        mask = np.ones(dots.shape, dtype=bool)
    return float(np.degrees(np.mean(np.arccos(_masked(dots, mask)))))


def metric_sie(a_pred: np.ndarray, a_gt: np.ndarray, mask=None) -> float:
    """Scale-invariant albedo error: mean-subtracted squared error, channels
    summed per pixel, averaged over valid pixels."""
    a_pred = np.asarray(a_pred, dtype=np.float64)
    a_gt = np.asarray(a_gt, dtype=np.float64)
    if a_pred.shape != a_gt.shape:
        raise RasterError("metric_sie inputs must have equal shapes")
    if mask is None:
        mask = np.ones(a_pred.shape[:2], dtype=bool)
    mask = as_mask(mask, like=a_pred)
    if not mask.any():
        raise RasterError("empty mask")
    p = a_pred[mask]
    g = a_gt[mask]
    diff = (g - g.mean(axis=0)) - (p - p.mean(axis=0))
    return float(np.mean(np.sum(diff**2, axis=1)))


def metric_mse_l1(pred: np.ndarray, gt: np.ndarray, mask=None) -> tuple[float, float]:
    """Masked mean squared and mean absolute error."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise RasterError("metric inputs must have equal shapes")
    if mask is None:
        mask = np.ones(pred.shape[:2], dtype=bool)
    mask = as_mask(mask)
    if not mask.any():
        raise RasterError("empty mask")
    err = (pred - gt)[mask]
    return float(np.mean(err**2)), float(np.mean(np.abs(err)))


def metric_report(a_pred, a_gt, n_pred, n_gt, mask=None) -> MetricReport:
    """Full evaluation: albedo MSE/L1/SIE/SSIM plus normal angle deviation."""
    mse, l1 = metric_mse_l1(a_pred, a_gt, mask)
    if mask is None:
        count = int(np.prod(np.asarray(a_pred).shape[:2]))
    else:
        count = int(as_mask(mask).sum())
    return MetricReport(
        mse=mse,
        l1=l1,
        dia_degrees=metric_dia(n_pred, n_gt, mask),
        sie=metric_sie(a_pred, a_gt, mask),
        ssim=ssim(a_pred, a_gt),
        pixel_count=count,
    )
