"""Image representation and file I/O.

Images are numpy arrays of shape (height, width, channels) with channels
1 or 3, float32, nominal display range [0, 1].  Values may leave that
range while an image is being optimized; they are clamped when written
to disk.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ChannelMismatch, SizeMismatch

# Rec. 601 luma coefficients.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def as_image(data, channels: int | None = None) -> np.ndarray:
    """Coerce ``data`` to a float32 (H, W, C) image array.

    2-D input becomes single-channel.  Raises ValueError for anything
    that is not a finite raster with 1 or 3 channels.
    """
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, 1|3) image data, got shape {arr.shape}")
    if channels is not None and arr.shape[2] != channels:
        raise ChannelMismatch(f"expected {channels} channels, got {arr.shape[2]}")
    if not np.isfinite(arr).all():
        raise ValueError("image contains NaN or Inf")
    return arr


def check_same_size(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise SizeMismatch(f"sizes differ: {a.shape[:2]} vs {b.shape[:2]}")


def luminance(image: np.ndarray) -> np.ndarray:
    """Collapse an image to a single (H, W) luma plane."""
    if image.shape[2] == 1:
        return image[:, :, 0]
    return image @ _LUMA


def clamp01(image: np.ndarray) -> np.ndarray:
    return np.clip(image, 0.0, 1.0)


def to_bytes(image: np.ndarray) -> np.ndarray:
    """Quantize to uint8, clamping to the display range first."""
    return (np.clip(image, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Read a PNG or binary PPM file into a float32 image in [0, 1]."""
    with Image.open(path) as im:
        if im.mode not in ("RGB", "L"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float32) / 255.0


def save_image(path, image: np.ndarray) -> None:
    """Write an image as 8-bit PNG or PPM, chosen by file extension."""
    path = Path(path)
    data = to_bytes(as_image(image))
    if data.shape[2] == 1:
        pil = Image.fromarray(data[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(data, mode="RGB")
    fmt = "PPM" if path.suffix.lower() in (".ppm", ".pnm") else "PNG"
    pil.save(path, format=fmt)


def noise_image(height: int, width: int, channels: int = 3, seed: int = 0) -> np.ndarray:
    """Uniform noise in [0, 1], reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    return rng.random((height, width, channels), dtype=np.float32)
