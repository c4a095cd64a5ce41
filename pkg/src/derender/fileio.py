"""File formats: Portable Float Map (PFM) for float maps and 8-bit PNG for
images and masks. Both round-trip losslessly."""

from __future__ import annotations

import numpy as np
from PIL import Image as PILImage


class FileFormatError(ValueError):
    """Base class for malformed or unsupported file content."""


class PfmError(FileFormatError):
    pass


class PngError(FileFormatError):
    pass


def load_pfm(path, reject_nan: bool = False) -> np.ndarray:
    """Read a PFM file into (H, W) or (H, W, 3) float64.

    Accepts both endiannesses (scale sign per the PFM convention); rows are
    stored bottom-to-top.
    """
    with open(path, "rb") as f:
        data = f.read()
    try:
        header, rest = data.split(b"\n", 1)
    except ValueError:
        raise PfmError("malformed PFM header: missing newline") from None
    if header == b"PF":
        channels = 3
    elif header == b"Pf":
        channels = 1
    else:
        raise PfmError(f"malformed PFM header: {header[:8]!r}")
    try:
        dims, rest = rest.split(b"\n", 1)
        w_str, h_str = dims.split()
        width, height = int(w_str), int(h_str)
        scale_line, payload = rest.split(b"\n", 1)
        scale = float(scale_line)
    except ValueError:
        raise PfmError("malformed PFM header: bad dimensions or scale") from None
    if width < 1 or height < 1:
        raise PfmError("PFM dimensions must be positive")
    if scale == 0.0:
        raise PfmError("PFM scale must be non-zero")
    expected = width * height * channels * 4
    if len(payload) < expected:
        raise PfmError(f"truncated PFM payload: expected {expected} bytes, got {len(payload)}")
    dtype = "<f4" if scale < 0 else ">f4"
    values = np.frombuffer(payload[:expected], dtype=dtype).astype(np.float64)
    if reject_nan and not np.all(np.isfinite(values)):
        raise PfmError("PFM payload contains NaN or infinite values")
    if abs(scale) != 1.0:
        values = values * abs(scale)
    img = values.reshape(height, width, channels)
    img = np.flipud(img)
    return img[..., 0].copy() if channels == 1 else img.copy()


def save_pfm(path, m: np.ndarray) -> None:
    """Write a map as canonical little-endian PFM (scale -1.0, float32)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 2:
        header = b"Pf"
        rows = np.flipud(m)
    elif m.ndim == 3 and m.shape[2] == 3:
        header = b"PF"
        rows = np.flipud(m)
    else:
        raise PfmError(f"PFM supports (H, W) or (H, W, 3) maps, got shape {m.shape}")
    h, w = m.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())


def load_image_png(path) -> np.ndarray:
    """Read an 8-bit RGB(A) PNG into an (H, W, 3) image with values byte/255."""
    with PILImage.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L"):
            raise PngError(f"unsupported PNG bit depth (mode {im.mode}); 8-bit required")
        if im.mode not in ("RGB", "RGBA", "L", "LA", "P"):
            raise PngError(f"unsupported PNG mode {im.mode}")
        rgb = im.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float64)
    return arr / 255.0


def save_image_png(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise PngError(f"image must be (H, W, 3), got {img.shape}")
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(data, mode="RGB").save(path, format="PNG")


def png_bytes(img: np.ndarray) -> bytes:
    """Deterministically PNG-encode an image in memory."""
    import io

    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=-1)
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_mask_png(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG mask; bytes above 127 are valid."""
    with PILImage.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L"):
            raise PngError(f"unsupported PNG bit depth (mode {im.mode}); 8-bit required")
        if im.mode not in ("L", "LA", "1", "P"):
            raise PngError(f"mask PNG must be grayscale, got mode {im.mode}")
        arr = np.asarray(im.convert("L"))
    return arr > 127


def save_mask_png(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask).astype(bool)
    if mask.ndim != 2:
        raise PngError(f"mask must be 2-d, got shape {mask.shape}")
    PILImage.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")
