"""k-means color clustering and lesion-cluster selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .colormodel import ColorRange, in_range_mask


@dataclass
class KMeansParams:
    k: int = 5
    max_iters: int = 100
    tol: float = 1e-4  # max centroid shift, in units of the 0..1 color scale
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")


@dataclass
class ClusterResult:
    centroids: np.ndarray  # (k, 3) float64, RGB
    labels: np.ndarray  # (H, W) int32
    inertia: float
    iterations: int


def _kmeanspp(pixels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = pixels.shape[0]
    centers = np.empty((k, 3))
    centers[0] = pixels[rng.integers(n)]
    d2 = ((pixels - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[j] = pixels[idx]
        np.minimum(d2, ((pixels - centers[j]) ** 2).sum(axis=1), out=d2)
    return centers


def kmeans(img: np.ndarray, params: KMeansParams | None = None, trace=None) -> ClusterResult:
    """Lloyd's k-means over pixel colors with k-means++ seeding.

    Parameters
    ----------
    img : (H, W, 3) uint8 array
    params : KMeansParams
    trace : list, optional
        If given, the inertia of every assignment step is appended to it.

    Returns
    -------
    ClusterResult
        ``labels`` hold the nearest centroid of every pixel (ties go to the
        lower index) under the returned ``centroids``.
    """
    params = params or KMeansParams()
    h, w = img.shape[:2]
    pixels = np.ascontiguousarray(img.reshape(-1, 3), dtype=np.float64)
    n = pixels.shape[0]
    if params.k > n:
        raise ValueError(f"k={params.k} exceeds the number of pixels ({n})")
    rng = np.random.Generator(np.random.PCG64(params.seed))
    centroids = _kmeanspp(pixels, params.k, rng)
    tol = params.tol * 255.0
    iterations = 0
    for iterations in range(1, params.max_iters + 1):
        labels, inertia, sums, counts = _kernels.kmeans_assign(pixels, centroids)
        if trace is not None:
            trace.append(inertia)
        new = centroids.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        if not filled.all():
            # re-seed each empty cluster at the pixel worst served by its centroid
            d = ((pixels - centroids[labels]) ** 2).sum(axis=1)
            for j in np.flatnonzero(~filled):
                far = int(np.argmax(d))
                new[j] = pixels[far]
                d[far] = -1.0
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift <= tol:
            break
    labels, inertia, _, _ = _kernels.kmeans_assign(pixels, centroids)
    if trace is not None:
        trace.append(inertia)
    return ClusterResult(
        centroids=centroids,
        labels=labels.reshape(h, w),
        inertia=float(inertia),
        iterations=iterations,
    )


def cluster_fractions(img: np.ndarray, result: ClusterResult, rng: ColorRange):
    """Per-cluster ``(fraction in range, member count)`` arrays."""
    k = result.centroids.shape[0]
    labels = result.labels.ravel()
    inside = in_range_mask(img.reshape(-1, 3), rng)
    counts = np.bincount(labels, minlength=k)
    hits = np.bincount(labels, weights=inside, minlength=k)
    frac = np.divide(hits, counts, out=np.zeros(k), where=counts > 0)
    return frac, counts


def select_lesion_clusters(img: np.ndarray, result: ClusterResult, rng: ColorRange,
                           min_fraction: float = 0.5) -> list[int]:
    """Clusters whose share of in-range pixels is at least ``min_fraction``,
    best first (fraction, then size, both descending)."""
    frac, counts = cluster_fractions(img, result, rng)
    keep = [j for j in range(len(frac)) if counts[j] > 0 and frac[j] >= min_fraction]
    return sorted(keep, key=lambda j: (-frac[j], -counts[j], j))
