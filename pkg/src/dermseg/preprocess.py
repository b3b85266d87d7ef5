"""Illumination correction (CLAHE on L) and hair removal (Frangi vesselness)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .imgcore import check_rgb, lab_to_rgb, maybe_downscale, rgb_to_gray, rgb_to_lab


@dataclass
class ClaheParams:
    clip_limit: float = 2.0
    tiles_x: int = 8
    tiles_y: int = 8
    bins: int = 256

    def __post_init__(self):
        if not self.clip_limit >= 1.0:
            raise ValueError("clip_limit must be >= 1")
        if self.tiles_x < 1 or self.tiles_y < 1:
            raise ValueError("tile grid must be at least 1x1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")


@dataclass
class FrangiParams:
    sigmas: list = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0])
    beta: float = 0.5
    c: float | None = None  # None: half the largest structureness per scale
    bright_on_dark: bool = False

    def __post_init__(self):
        s = [float(v) for v in self.sigmas]
        if not s or any(v <= 0 for v in s) or any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("sigmas must be non-empty, positive and strictly increasing")
        self.sigmas = s
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.c is not None and not self.c > 0:
            raise ValueError("c must be positive")


@dataclass
class HairRemovalParams:
    response_threshold: float = 0.25
    dilation_radius: int = 2
    inpaint_radius: int = 5
    # dark-line evidence required of hair candidates (see hair_support);
    # min_contrast=0 turns the check off
    min_contrast: float = 25.0
    closing_length: int = 11

    def __post_init__(self):
        if not 0.0 <= self.response_threshold <= 1.0:
            raise ValueError("response_threshold must lie in [0, 1]")
        if self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")
        if self.inpaint_radius < 1:
            raise ValueError("inpaint_radius must be >= 1")
        if self.min_contrast < 0:
            raise ValueError("min_contrast must be non-negative")
        if self.closing_length < 1:
            raise ValueError("closing_length must be >= 1")


@dataclass
class HessianField:
    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray


# -- CLAHE ----------------------------------------------------------------------

def _tile_edges(n: int, tiles: int) -> np.ndarray:
    return np.floor(np.arange(tiles + 1) * n / tiles + 0.5).astype(np.intp)


def _tile_mapping(q: np.ndarray, bins: int, clip_limit: float) -> np.ndarray:
    """Clipped-equalization lookup table for one tile of bin indices.

    The table sends bin ``b`` to ``bins * (C(b-1) + h(b)/2) / N - 0.5``
    (mid-rank form), clamped to ``[0, bins-1]``; a flat histogram maps to
    the identity.
    """
    hist = np.bincount(q.ravel(), minlength=bins).astype(np.float64)
    total = hist.sum()
    if np.isfinite(clip_limit):
        limit = clip_limit * total / bins
        excess = np.maximum(hist - limit, 0.0).sum()
        if excess > 0:
            hist = np.minimum(hist, limit) + excess / bins
    before = np.concatenate(([0.0], np.cumsum(hist)[:-1]))
    lut = bins * (before + hist / 2.0) / total - 0.5
    return np.clip(lut, 0.0, bins - 1)


def _interp_weights(n: int, centers: np.ndarray):
    """Per-position (lower tile, upper tile, weight of upper) along one axis."""
    pos = np.arange(n, dtype=np.float64)
    t = len(centers)
    hi = np.searchsorted(centers, pos, side="right")
    lo = np.clip(hi - 1, 0, t - 1)
    hi = np.clip(hi, 0, t - 1)
    span = centers[hi] - centers[lo]
    w = np.where(span > 0, (pos - centers[lo]) / np.where(span > 0, span, 1.0), 0.0)
    return lo, hi, np.clip(w, 0.0, 1.0)


def clahe_gray(lightness: np.ndarray, params: ClaheParams) -> np.ndarray:
    """CLAHE on a lightness plane with values in [0, 100].

    Lightness is quantized to ``params.bins`` levels, each tile gets a
    clipped-equalization mapping and pixels blend the mappings of the
    surrounding tile centers bilinearly. Returns lightness in [0, 100].
    """
    h, w = lightness.shape
    if h < params.tiles_y or w < params.tiles_x:
        raise ValueError(
            f"{w}x{h} image is smaller than the {params.tiles_x}x{params.tiles_y} tile grid"
        )
    bins = params.bins
    step = 100.0 / (bins - 1)
    q = np.clip(np.floor(lightness / step + 0.5), 0, bins - 1).astype(np.intp)

    ye = _tile_edges(h, params.tiles_y)
    xe = _tile_edges(w, params.tiles_x)
    luts = np.empty((params.tiles_y, params.tiles_x, bins))
    for ty in range(params.tiles_y):
        for tx in range(params.tiles_x):
            tile = q[ye[ty]:ye[ty + 1], xe[tx]:xe[tx + 1]]
            luts[ty, tx] = _tile_mapping(tile, bins, params.clip_limit)

    yc = (ye[:-1] + ye[1:] - 1) / 2.0
    xc = (xe[:-1] + xe[1:] - 1) / 2.0
    ylo, yhi, wy = _interp_weights(h, yc)
    xlo, xhi, wx = _interp_weights(w, xc)
    wy = wy[:, None]
    wx = wx[None, :]
    yl, yh = ylo[:, None], yhi[:, None]
    xl, xh = xlo[None, :], xhi[None, :]
    top = luts[yl, xl, q] * (1.0 - wx) + luts[yl, xh, q] * wx
    bottom = luts[yh, xl, q] * (1.0 - wx) + luts[yh, xh, q] * wx
    mapped = top * (1.0 - wy) + bottom * wy
    return np.clip(mapped * step, 0.0, 100.0)


def clahe_l_channel(img: np.ndarray, params: ClaheParams | None = None) -> np.ndarray:
    """Contrast-limited adaptive equalization of the Lab lightness channel."""
    params = params or ClaheParams()
    lab = rgb_to_lab(check_rgb(img))
    lab[..., 0] = clahe_gray(lab[..., 0], params)
    return lab_to_rgb(lab)


# -- Hessian / Frangi -----------------------------------------------------------

def gaussian_kernels(sigma: float, truncate: float = 4.0):
    """Sampled Gaussian and its first/second derivative kernels.

    The derivative kernels are moment-corrected so that, applied as
    correlation weights, they reproduce the derivatives of polynomials up
    to degree two exactly: smoothing sums to 1, the first-derivative kernel
    maps ``t`` to 1 and the second-derivative kernel maps ``t**2`` to 2.
    """
    radius = int(truncate * sigma + 0.5)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    g /= g.sum()
    d1 = t * g
    d1 /= (t * d1).sum()
    d2 = (t * t / sigma ** 4 - 1.0 / sigma ** 2) * g
    d2 -= g * d2.sum()
    d2 *= 2.0 / (t * t * d2).sum()
    return g, d1, d2


def hessian2d(gray: np.ndarray, sigma: float) -> HessianField:
    """Scale-normalized second derivatives by Gaussian-derivative convolution.

    Kernels are truncated at 4 sigma; borders are reflected.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    g = np.asarray(gray, dtype=np.float64)
    k0, k1, k2 = gaussian_kernels(sigma)
    s2 = sigma * sigma

    def sep(img, ky, kx):
        tmp = ndimage.correlate1d(img, ky, axis=0, mode="reflect")
        return ndimage.correlate1d(tmp, kx, axis=1, mode="reflect")

    dxx = sep(g, k0, k2) * s2
    dyy = sep(g, k2, k0) * s2
    dxy = sep(g, k1, k1) * s2
    return HessianField(dxx=dxx, dxy=dxy, dyy=dyy)


def hessian_eigenvalues(hf: HessianField):
    """Eigenvalues ``(l1, l2)`` of the 2x2 Hessian with ``|l1| <= |l2|``."""
    half_trace = (hf.dxx + hf.dyy) / 2.0
    root = np.hypot((hf.dxx - hf.dyy) / 2.0, hf.dxy)
    a = half_trace + root
    b = half_trace - root
    swap = np.abs(a) > np.abs(b)
    l1 = np.where(swap, b, a)
    l2 = np.where(swap, a, b)
    return l1, l2


def vesselness_from_eigenvalues(l1, l2, beta: float, c: float, bright_on_dark: bool):
    l1 = np.asarray(l1, dtype=np.float64)
    l2 = np.asarray(l2, dtype=np.float64)
    nonzero = l2 != 0
    safe = np.where(nonzero, l2, 1.0)
    rb2 = (l1 / safe) ** 2
    s2 = l1 * l1 + l2 * l2
    v = np.exp(-rb2 / (2.0 * beta * beta)) * (1.0 - np.exp(-s2 / (2.0 * c * c)))
    wrong_sign = (l2 > 0) if bright_on_dark else (l2 < 0)
    return np.where(nonzero & ~wrong_sign, v, 0.0)


def frangi_vesselness(gray: np.ndarray, params: FrangiParams | None = None) -> np.ndarray:
    """Multiscale 2D vesselness, normalized so the strongest pixel is 1."""
    params = params or FrangiParams()
    g = np.asarray(gray, dtype=np.float64)
    # float noise on flat regions must not be normalized up to 1
    floor = 1e-9 * max(1.0, float(np.abs(g).max(initial=0.0)))
    out = np.zeros_like(g)
    for sigma in params.sigmas:
        l1, l2 = hessian_eigenvalues(hessian2d(g, sigma))
        small = np.abs(l2) <= floor
        l1 = np.where(small, 0.0, l1)
        l2 = np.where(small, 0.0, l2)
        c = params.c
        if c is None:
            smax = float(np.sqrt(l1 * l1 + l2 * l2).max(initial=0.0))
            if smax == 0.0:
                continue
            c = smax / 2.0
        v = vesselness_from_eigenvalues(l1, l2, params.beta, c, params.bright_on_dark)
        np.maximum(out, v, out=out)
    peak = out.max(initial=0.0)
    if peak > 0:
        out /= peak
    return out


# -- hair removal ----------------------------------------------------------------

def disk_offsets(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (xx * xx + yy * yy) <= r * r


def hair_support(gray: np.ndarray, params: HairRemovalParams | None = None) -> np.ndarray:
    """Pixels darker than their surroundings by ``min_contrast`` along a line.

    Black-hat against the larger of a horizontal and a vertical closing of
    length ``closing_length``: thin dark strokes in any direction are filled
    by at least one of them, while lesion borders wider than the segment are
    left alone. A normalized vesselness map always peaks somewhere, so this
    keeps lesion rims of hairless images out of the hair mask.
    """
    params = params or HairRemovalParams()
    g = np.asarray(gray, dtype=np.float64)
    if params.min_contrast <= 0:
        return np.ones(g.shape, dtype=bool)
    n = params.closing_length
    closed = np.maximum(ndimage.grey_closing(g, size=(1, n), mode="reflect"),
                        ndimage.grey_closing(g, size=(n, 1), mode="reflect"))
    return (closed - g) >= params.min_contrast


def detect_hair(response: np.ndarray, params: HairRemovalParams | None = None,
                support: np.ndarray | None = None) -> np.ndarray:
    """Threshold a [0, 1] vesselness map and dilate with a disk.

    ``support``, when given, restricts candidates before dilation.
    """
    params = params or HairRemovalParams()
    mask = np.asarray(response) >= params.response_threshold
    if support is not None:
        mask &= support
    if params.dilation_radius > 0 and mask.any():
        mask = ndimage.binary_dilation(mask, structure=disk_offsets(params.dilation_radius))
    return mask


def remove_hair(img: np.ndarray, hair: np.ndarray,
                params: HairRemovalParams | None = None) -> np.ndarray:
    """Replace masked pixels by the lower channel-wise median of nearby clean pixels.

    The window is a square of side ``2*inpaint_radius+1``; it grows by
    ``inpaint_radius`` until it holds at least one unmasked pixel.
    """
    params = params or HairRemovalParams()
    check_rgb(img)
    if hair.shape != img.shape[:2]:
        raise ValueError(f"mask shape {hair.shape} does not match image {img.shape[:2]}")
    if hair.all():
        raise ValueError("hair mask covers the whole image; nothing to sample from")
    if not hair.any():
        return img.copy()
    return _kernels.median_fill(np.ascontiguousarray(img), hair, int(params.inpaint_radius))


@dataclass
class PreprocessParams:
    downscale_threshold: int = 1500
    downscale_factor: float = 0.25
    clahe: ClaheParams = field(default_factory=ClaheParams)
    frangi: FrangiParams = field(default_factory=FrangiParams)
    hair: HairRemovalParams = field(default_factory=HairRemovalParams)
    illumination: bool = True
    hair_removal: bool = True


def preprocess_image(img: np.ndarray, params: PreprocessParams | None = None):
    """Scale, correct illumination, remove hair. Returns ``(image, hair_mask)``."""
    params = params or PreprocessParams()
    out = maybe_downscale(check_rgb(img), params.downscale_threshold, params.downscale_factor)
    if params.illumination:
        h, w = out.shape[:2]
        clahe = params.clahe
        if h < clahe.tiles_y or w < clahe.tiles_x:
            clahe = ClaheParams(clahe.clip_limit, min(clahe.tiles_x, w), min(clahe.tiles_y, h),
                                clahe.bins)
        out = clahe_l_channel(out, clahe)
    hair = np.zeros(out.shape[:2], dtype=bool)
    if params.hair_removal:
        gray = rgb_to_gray(out)
        response = frangi_vesselness(gray, params.frangi)
        hair = detect_hair(response, params.hair, hair_support(gray, params.hair))
        if hair.all():
            hair = np.zeros_like(hair)
        elif hair.any():
            out = remove_hair(out, hair, params.hair)
    return out, hair
