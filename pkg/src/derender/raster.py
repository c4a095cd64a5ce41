"""Low-level raster operations shared by the whole toolkit.

Maps are plain numpy arrays with the following conventions:

* scalar map: float array of shape (H, W)
* image:      float array of shape (H, W, 3), values in [0, 1]
* normal map: float array of shape (H, W, 3), unit vectors per pixel
* mask:       bool array of shape (H, W), True = valid
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


class RasterError(ValueError):
    """Raised for invalid raster inputs (shape, range, empty mask ...)."""


def as_scalar_map(values) -> np.ndarray:
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise RasterError(f"scalar map must be 2-d, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise RasterError("scalar map contains non-finite values")
    return m


def as_image(values) -> np.ndarray:
    img = np.asarray(values, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise RasterError(f"image must have shape (H, W, 3), got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise RasterError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise RasterError("image values must lie in [0, 1]")
    return img


def as_normal_map(values, tol: float = 1e-5) -> np.ndarray:
    n = np.asarray(values, dtype=np.float64)
    if n.ndim != 3 or n.shape[2] != 3:
        raise RasterError(f"normal map must have shape (H, W, 3), got {n.shape}")
    if not np.all(np.isfinite(n)):
        raise RasterError("normal map contains non-finite values")
    norms = np.linalg.norm(n, axis=-1)
    if np.abs(norms - 1.0).max() > tol:
        raise RasterError("normal map vectors must be unit length")
    return n


def as_mask(values, like: np.ndarray | None = None) -> np.ndarray:
    m = np.asarray(values)
    if m.dtype != bool:
        m = m.astype(bool)
    if m.ndim != 2:
        raise RasterError(f"mask must be 2-d, got shape {m.shape}")
    if like is not None and m.shape != like.shape[:2]:
        raise RasterError(f"mask shape {m.shape} does not match map {like.shape[:2]}")
    return m


def normalize_vectors(v: np.ndarray, fallback=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Unit-normalize the last axis; zero vectors become ``fallback``."""
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    out = np.where(norms > 0, v / np.where(norms > 0, norms, 1.0), np.asarray(fallback, dtype=v.dtype))
    return out


def brightness_hsv(img: np.ndarray) -> np.ndarray:
    """Per-pixel brightness: the HSV value channel, max(R, G, B)."""
    img = as_image(img)
    return img.max(axis=-1)


# 3x3 Sobel kernels normalized by 1/8 so a unit ramp has gradient 1.
_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64) / 8.0
_SOBEL_Y = _SOBEL_X.T


def _correlate_replicate(m: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    p = np.pad(m, 1, mode="edge")
    out = np.zeros_like(m)
    for di in range(3):
        for dj in range(3):
            w = kernel[di, dj]
            if w != 0.0:
                out += w * p[di : di + m.shape[0], dj : dj + m.shape[1]]
    return out


def _correlate_replicate_adjoint(g: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`_correlate_replicate` (needed for analytic gradients)."""
    H, W = g.shape
    acc = np.zeros((H + 2, W + 2), dtype=np.float64)
    for di in range(3):
        for dj in range(3):
            w = kernel[di, dj]
            if w != 0.0:
                acc[di : di + H, dj : dj + W] += w * g
    # Fold the padded border back into the edge pixels (adjoint of edge-pad).
    out = acc[1:-1, 1:-1].copy()
    out[0, :] += acc[0, 1:-1]
    out[-1, :] += acc[-1, 1:-1]
    out[:, 0] += acc[1:-1, 0]
    out[:, -1] += acc[1:-1, -1]
    out[0, 0] += acc[0, 0]
    out[0, -1] += acc[0, -1]
    out[-1, 0] += acc[-1, 0]
    out[-1, -1] += acc[-1, -1]
    return out


def _per_channel(fn, m: np.ndarray, *args) -> np.ndarray:
    if m.ndim == 2:
        return fn(m, *args)
    return np.stack([fn(m[..., c], *args) for c in range(m.shape[2])], axis=-1)


def sobel_gradients(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Image gradients (gx, gy) via 1/8-normalized Sobel kernels.

    Borders are replicate-padded. Works on scalar maps and per channel on
    3-channel maps.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape[0] < 3 or m.shape[1] < 3:
        raise RasterError(f"sobel_gradients needs at least 3x3, got {m.shape[:2]}")
    gx = _per_channel(_correlate_replicate, m, _SOBEL_X)
    gy = _per_channel(_correlate_replicate, m, _SOBEL_Y)
    return gx, gy


def sobel_gradients_adjoint(gx_bar: np.ndarray, gy_bar: np.ndarray) -> np.ndarray:
    """Backpropagate cotangents of (gx, gy) through :func:`sobel_gradients`."""
    ax = _per_channel(_correlate_replicate_adjoint, np.asarray(gx_bar, dtype=np.float64), _SOBEL_X)
    ay = _per_channel(_correlate_replicate_adjoint, np.asarray(gy_bar, dtype=np.float64), _SOBEL_Y)
    return ax + ay


def fill_sparse_nearest(m: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Fill invalid pixels with the value of the nearest valid pixel.

    Distance is Euclidean in pixel coordinates; ties go to the
    lexicographically smallest (row, col) so the result is deterministic.
    """
    valid = as_mask(valid, like=m)
    if not valid.any():
        raise RasterError("fill_sparse_nearest requires at least one valid pixel")
    if valid.all():
        return np.array(m, copy=True)

    H, W = valid.shape
    src = np.argwhere(valid)  # sorted lexicographically by argwhere
    dst = np.argwhere(~valid)
    tree = cKDTree(src)
    dists, idx = tree.query(dst)
    # Resolve distance ties toward the lexicographically smallest source pixel.
    groups = tree.query_ball_point(dst, dists + 1e-9)
    for k, g in enumerate(groups):
        if len(g) > 1:
            d2 = np.sum((src[g] - dst[k]) ** 2, axis=1)
            tied = [g[j] for j in np.flatnonzero(np.isclose(d2, d2.min()))]
            idx[k] = min(tied)  # src rows are lexicographically ordered
    out = np.array(m, copy=True)
    out[dst[:, 0], dst[:, 1]] = m[src[idx, 0], src[idx, 1]]
    return out


def resample(m: np.ndarray, new_h: int, new_w: int, mode: str = "bilinear") -> np.ndarray:
    """Resample a map with the align-corners=false pixel-center convention.

    ``mode`` is "nearest" or "bilinear". Normal maps should be re-normalized
    by the caller after bilinear resampling (see :func:`resample_normals`).
    """
    if new_h < 1 or new_w < 1:
        raise RasterError("target size must be at least 1x1")
    m = np.asarray(m, dtype=np.float64)
    H, W = m.shape[:2]
    if (new_h, new_w) == (H, W):
        return np.array(m, copy=True)

    ys = (np.arange(new_h) + 0.5) * (H / new_h) - 0.5
    xs = (np.arange(new_w) + 0.5) * (W / new_w) - 0.5
    if mode == "nearest":
        yi = np.clip(np.round(ys), 0, H - 1).astype(int)
        xi = np.clip(np.round(xs), 0, W - 1).astype(int)
        return m[np.ix_(yi, xi)] if m.ndim == 2 else m[np.ix_(yi, xi)].copy()
    if mode != "bilinear":
        raise RasterError(f"unknown resampling mode {mode!r}")

    y0 = np.clip(np.floor(ys), 0, H - 1).astype(int)
    x0 = np.clip(np.floor(xs), 0, W - 1).astype(int)
    y1 = np.clip(y0 + 1, 0, H - 1)
    x1 = np.clip(x0 + 1, 0, W - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)
    wx = np.clip(xs - x0, 0.0, 1.0)
    if m.ndim == 3:
        wy_ = wy[:, None, None]
        wx_ = wx[None, :, None]
    else:
        wy_ = wy[:, None]
        wx_ = wx[None, :]
    top = m[np.ix_(y0, x0)] * (1 - wx_) + m[np.ix_(y0, x1)] * wx_
    bot = m[np.ix_(y1, x0)] * (1 - wx_) + m[np.ix_(y1, x1)] * wx_
    return top * (1 - wy_) + bot * wy_


def resample_normals(n: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Bilinear-resample a normal map and re-unit-normalize the result."""
    return normalize_vectors(resample(n, new_h, new_w, mode="bilinear"))


def resample_mask(mask: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    return resample(as_mask(mask).astype(np.float64), new_h, new_w, mode="nearest") > 0.5
