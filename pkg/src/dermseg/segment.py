"""Dual-seed flood fill and connected-component labeling of lesion clusters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .cluster import ClusterResult, KMeansParams, cluster_fractions, kmeans, select_lesion_clusters
from .colormodel import ColorRange, LesionColorModel, in_range_mask
from .imgcore import PixelCoord, check_rgb, round_half_up

FIXED_SEED = "fixed-seed-color"
MOVING_LOCAL = "moving-local-color"


@dataclass
class FloodFillParams:
    tolerance: int = 20
    connectivity: int = 4
    reference: str = FIXED_SEED

    def __post_init__(self):
        if not 0 <= self.tolerance <= 255:
            raise ValueError("tolerance must lie in [0, 255]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.reference not in (FIXED_SEED, MOVING_LOCAL):
            raise ValueError(f"unknown flood-fill reference {self.reference!r}")


@dataclass
class Region:
    mask: np.ndarray
    area: int
    bbox: tuple  # (x0, y0, x1, y1), inclusive

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "Region":
        ys, xs = np.nonzero(mask)
        if ys.size == 0:
            return cls(mask, 0, (0, 0, -1, -1))
        return cls(mask, int(ys.size), (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())))


@dataclass
class Component:
    label: int
    area: int
    bbox: tuple  # (x0, y0, x1, y1), inclusive


@dataclass
class SeedSpec:
    centroid_seed: PixelCoord
    boundary_seed: PixelCoord
    source_cluster: int
    boundary_used: bool = True


@dataclass
class SegmentParams:
    kmeans: KMeansParams = field(default_factory=KMeansParams)
    flood: FloodFillParams = field(default_factory=FloodFillParams)
    min_fraction: float = 0.5
    boundary_offset: int = 10
    seed_all_clusters: bool = False
    fill_holes: bool = True
    class_name: str | None = None


@dataclass
class SegmentationResult:
    mask: np.ndarray
    regions: list = field(default_factory=list)
    selected_clusters: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    no_cluster_selected: bool = False
    fallback_used: bool = False
    clusters: ClusterResult | None = None


def cluster_spatial_centroid(labels: np.ndarray, cluster_id: int) -> PixelCoord:
    """Rounded mean position of a cluster, snapped to the nearest member."""
    member = labels == cluster_id
    ys, xs = np.nonzero(member)
    if ys.size == 0:
        raise ValueError(f"cluster {cluster_id} has no pixels")
    cx = int(round_half_up(xs.mean()))
    cy = int(round_half_up(ys.mean()))
    if member[cy, cx]:
        return PixelCoord(cx, cy)
    # np.nonzero is row-major, so argmin breaks ties in row-major order
    i = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
    return PixelCoord(int(xs[i]), int(ys[i]))


_NEIGHBORS_4 = ((0, -1), (-1, 0), (1, 0), (0, 1))  # (dx, dy)


def boundary_seed(cluster_mask: np.ndarray, centroid: PixelCoord, offset: int = 10) -> PixelCoord:
    """Point ``offset`` pixels past the cluster boundary nearest to ``centroid``.

    The ray runs from the centroid through the nearest boundary pixel (a
    member with a non-member 4-neighbor; outside the image counts as
    non-member). When the centroid is itself on the boundary the ray follows
    the summed directions of its non-member neighbors. The result is clamped
    to the image.
    """
    if offset < 1:
        raise ValueError("offset must be >= 1")
    h, w = cluster_mask.shape
    padded = np.pad(cluster_mask, 1, constant_values=False)
    interior = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    edge = cluster_mask & ~interior
    ys, xs = np.nonzero(edge)
    if ys.size == 0:
        raise ValueError("cluster mask is empty")
    cx, cy = centroid
    i = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
    bx, by = int(xs[i]), int(ys[i])
    if (bx, by) == (cx, cy):
        dx = dy = 0
        first = None
        for ox, oy in _NEIGHBORS_4:
            nx, ny = cx + ox, cy + oy
            if not (0 <= nx < w and 0 <= ny < h) or not cluster_mask[ny, nx]:
                dx += ox
                dy += oy
                first = first or (ox, oy)
        if dx == 0 and dy == 0:
            dx, dy = first if first else (1, 0)
    else:
        dx, dy = bx - cx, by - cy
    norm = float(np.hypot(dx, dy))
    px = int(round_half_up(bx + offset * dx / norm))
    py = int(round_half_up(by + offset * dy / norm))
    return PixelCoord(min(max(px, 0), w - 1), min(max(py, 0), h - 1))


def flood_fill(img: np.ndarray, seed: PixelCoord, params: FloodFillParams | None = None) -> Region:
    """Breadth-first region growing from ``seed``.

    A neighbor joins when every channel differs from the reference color by
    at most ``tolerance``. The reference is the seed color, or the color of
    the pixel the neighbor was reached from under ``moving-local-color``.
    """
    params = params or FloodFillParams()
    check_rgb(img)
    h, w = img.shape[:2]
    x, y = seed
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"seed {seed} outside {w}x{h} image")
    mask = _kernels.flood_fill(
        np.ascontiguousarray(img), int(y), int(x), int(params.tolerance),
        int(params.connectivity), params.reference == MOVING_LOCAL,
    )
    return Region.from_mask(mask)


def connected_components(mask: np.ndarray, connectivity: int = 4):
    """Two-pass union-find labeling.

    Returns ``(labels, components)``: labels are ``1..N`` in row-major
    first-encounter order (0 = background) and ``components[i]`` describes
    label ``i + 1``.
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    labels, n = _kernels.label_components(np.ascontiguousarray(mask, dtype=bool), connectivity)
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    comps = []
    for i, sl in enumerate(ndimage.find_objects(labels, max_label=n), start=1):
        ys, xs = sl
        comps.append(Component(i, int(areas[i]), (xs.start, ys.start, xs.stop - 1, ys.stop - 1)))
    return labels, comps


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Set background components that do not touch the image border."""
    labels, comps = connected_components(~mask, 4)
    if not comps:
        return mask.copy()
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    hole = np.ones(len(comps) + 1, dtype=bool)
    hole[0] = False
    hole[border] = False
    return mask | hole[labels]


def _fallback_cluster(img, result, rng: ColorRange):
    """Cluster whose mean color is nearest the range center, or None if the
    image has no in-range pixel at all."""
    if not in_range_mask(img.reshape(-1, 3), rng).any():
        return None
    _, counts = cluster_fractions(img, result, rng)
    d = ((result.centroids - rng.center) ** 2).sum(axis=1)
    d[counts == 0] = np.inf
    return int(np.argmin(d))


def segment_image(img: np.ndarray, model: LesionColorModel,
                  params: SegmentParams | None = None) -> SegmentationResult:
    """Segment a preprocessed image.

    k-means, then lesion-colored cluster selection, then two flood fills per
    seeded cluster (spatial centroid and a point past the cluster boundary),
    union, connected components, and optional hole filling. The boundary
    seed is only used when its color lies inside the model range.
    """
    params = params or SegmentParams()
    check_rgb(img)
    rng = model.range_for(params.class_name)
    result = kmeans(img, params.kmeans)
    out = SegmentationResult(mask=np.zeros(img.shape[:2], dtype=bool), clusters=result)

    selected = select_lesion_clusters(img, result, rng, params.min_fraction)
    if not selected:
        fb = _fallback_cluster(img, result, rng)
        if fb is None:
            out.no_cluster_selected = True
            return out
        selected = [fb]
        out.fallback_used = True
    out.selected_clusters = list(selected)

    seeded = selected if params.seed_all_clusters else selected[:1]
    union = np.zeros(img.shape[:2], dtype=bool)
    seed_points = []
    for cid in seeded:
        cmask = result.labels == cid
        c_seed = cluster_spatial_centroid(result.labels, cid)
        b_seed = boundary_seed(cmask, c_seed, params.boundary_offset)
        use_boundary = bool(in_range_mask(img[b_seed.y, b_seed.x], rng))
        out.seeds.append(SeedSpec(c_seed, b_seed, int(cid), use_boundary))
        points = [c_seed, b_seed] if use_boundary else [c_seed]
        for p in points:
            region = flood_fill(img, p, params.flood)
            out.regions.append(region)
            union |= region.mask
            seed_points.append(p)

    labels, _ = connected_components(union, params.flood.connectivity)
    keep = np.zeros(labels.max() + 1, dtype=bool)
    for p in seed_points:
        keep[labels[p.y, p.x]] = True
    keep[0] = False
    mask = keep[labels]
    if params.fill_holes:
        mask = fill_holes(mask)
    out.mask = mask
    return out
