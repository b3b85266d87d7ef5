"""Image representations, color conversion, scaling and file I/O.

Images are plain numpy arrays:

* RGB image: ``(H, W, 3)`` ``uint8``
* Lab image: ``(H, W, 3)`` ``float64`` with L in [0, 100]
* gray image: ``(H, W)`` ``float64``
* binary mask: ``(H, W)`` ``bool``, True = lesion / foreground
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

DOWNSCALE_THRESHOLD = 1500
DOWNSCALE_FACTOR = 0.25

# sRGB primaries, D65 white
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
# white point taken as the image of sRGB white so that white maps to a = b = 0
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_EPS = (6.0 / 29.0) ** 3
_KAPPA = (29.0 / 6.0) ** 2 / 3.0


class PixelCoord(NamedTuple):
    x: int
    y: int


def round_half_up(v):
    """Round half away from -inf, elementwise for arrays."""
    if isinstance(v, np.ndarray):
        return np.floor(v + 0.5)
    return math.floor(v + 0.5)


def check_rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 image, got {img.shape} {img.dtype}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    return img


def scaled_size(width: int, height: int, scale: float) -> tuple[int, int]:
    """Output ``(width, height)`` for a scale factor, rounding half up."""
    return int(round_half_up(width * scale)), int(round_half_up(height * scale))


def _sample_axis(n_out: int, n_in: int, scale: float):
    # center-aligned source coordinates, clamped to the valid range
    src = (np.arange(n_out) + 0.5) / scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def resize_bilinear(img: np.ndarray, scale: float) -> np.ndarray:
    """Resize an RGB image by ``scale`` with center-aligned bilinear sampling.

    Output dimensions are ``round(width*scale) x round(height*scale)``
    (half rounds up). Blended values are rounded half up to ``uint8``.
    """
    check_rgb(img)
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    h, w = img.shape[:2]
    ow, oh = scaled_size(w, h, scale)
    if ow < 1 or oh < 1:
        raise ValueError(f"scale {scale} turns {w}x{h} into an empty image")
    if ow == w and oh == h and scale == 1.0:
        return img.copy()
    y0, y1, fy = _sample_axis(oh, h, scale)
    x0, x1, fx = _sample_axis(ow, w, scale)
    src = img.astype(np.float64)
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    fy = fy[:, None, None]
    out = top * (1.0 - fy) + bottom * fy
    return np.clip(round_half_up(out), 0, 255).astype(np.uint8)


def resize_nearest(mask: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbor resize of a mask to an explicit size."""
    h, w = mask.shape[:2]
    if width < 1 or height < 1:
        raise ValueError("target size must be at least 1x1")
    ys = np.minimum(np.floor((np.arange(height) + 0.5) * h / height).astype(np.intp), h - 1)
    xs = np.minimum(np.floor((np.arange(width) + 0.5) * w / width).astype(np.intp), w - 1)
    return mask[ys][:, xs]


def needs_downscale(width: int, height: int, threshold: int = DOWNSCALE_THRESHOLD) -> bool:
    return max(width, height) > threshold


def downscaled_size(width: int, height: int, threshold: int = DOWNSCALE_THRESHOLD,
                    factor: float = DOWNSCALE_FACTOR) -> tuple[int, int]:
    if needs_downscale(width, height, threshold):
        return scaled_size(width, height, factor)
    return width, height


def maybe_downscale(img: np.ndarray, threshold: int = DOWNSCALE_THRESHOLD,
                    factor: float = DOWNSCALE_FACTOR) -> np.ndarray:
    """Shrink by ``factor`` when either side is strictly above ``threshold``."""
    h, w = img.shape[:2]
    if needs_downscale(w, h, threshold):
        return resize_bilinear(img, factor)
    return img


def maybe_downscale_mask(mask: np.ndarray, threshold: int = DOWNSCALE_THRESHOLD,
                         factor: float = DOWNSCALE_FACTOR) -> np.ndarray:
    """Apply the image downscale rule to a mask (nearest neighbor)."""
    h, w = mask.shape
    ow, oh = downscaled_size(w, h, threshold, factor)
    if (ow, oh) == (w, h):
        return mask
    return resize_nearest(mask, ow, oh)


def _srgb_to_linear(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c):
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    """CIE L*a*b* (D65, sRGB companding) of an 8-bit RGB image."""
    check_rgb(img)
    lin = _srgb_to_linear(img.astype(np.float64) / 255.0)
    xyz = lin @ _RGB_TO_XYZ.T / _WHITE
    f = np.where(xyz > _EPS, np.cbrt(xyz), xyz * _KAPPA + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    lab[..., 0] = np.clip(lab[..., 0], 0.0, 100.0)
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_lab`; rounds half up and clamps to [0, 255]."""
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    xyz = np.where(f > 6.0 / 29.0, f ** 3, (f - 4.0 / 29.0) / _KAPPA) * _WHITE
    rgb = _linear_to_srgb(xyz @ _XYZ_TO_RGB.T) * 255.0
    return np.clip(round_half_up(rgb), 0, 255).astype(np.uint8)


def rgb_to_gray(img: np.ndarray) -> np.ndarray:
    check_rgb(img)
    f = img.astype(np.float64)
    return 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]


def mask_boundary(mask: np.ndarray) -> np.ndarray:
    """True pixels with at least one false (or out-of-image) 4-neighbor."""
    padded = np.pad(mask, 1, constant_values=False)
    inner = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    return mask & ~inner


# -- file I/O ---------------------------------------------------------------

def read_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def read_mask(path) -> np.ndarray:
    """Decode a mask PNG; any gray value >= 128 is foreground."""
    with Image.open(path) as im:
        if im.mode not in ("L", "1"):
            im = im.convert("L")
        arr = np.asarray(im)
    if arr.dtype == bool:
        return arr.copy()
    return arr >= 128


def write_mask(path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(
        Path(path), format="PNG", optimize=False
    )


def write_rgb(path, img: np.ndarray, **kwargs) -> None:
    Image.fromarray(check_rgb(img), mode="RGB").save(Path(path), **kwargs)
