"""Lesion color model learned from per-class RGB histograms."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MODEL_VERSION = 1
UNLABELED = "unlabeled"


@dataclass
class ColorHistogram:
    bins: int = 256
    counts: np.ndarray = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((3, self.bins), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (3, self.bins):
            raise ValueError(f"counts must have shape (3, {self.bins})")

    @property
    def total(self) -> int:
        return int(self.counts[0].sum())

    def __add__(self, other: "ColorHistogram") -> "ColorHistogram":
        if other.bins != self.bins:
            raise ValueError("cannot add histograms with different bin counts")
        return ColorHistogram(self.bins, self.counts + other.counts)


@dataclass(frozen=True)
class ColorRange:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("range bounds must be (r, g, b) triples")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.lo, dtype=np.float64) + np.array(self.hi, dtype=np.float64)) / 2.0

    def contains(self, other: "ColorRange") -> bool:
        return all(a <= b for a, b in zip(self.lo, other.lo)) and all(
            a >= b for a, b in zip(self.hi, other.hi)
        )

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


FULL_RANGE = ColorRange((0, 0, 0), (255, 255, 255))


@dataclass
class LesionColorModel:
    combined: ColorRange
    per_class: dict = field(default_factory=dict)
    bins: int = 256
    percentile_lo: float = 1.0
    percentile_hi: float = 99.0
    pixel_counts: dict = field(default_factory=dict)

    def range_for(self, name: str | None = None) -> ColorRange:
        if name is None:
            return self.combined
        try:
            return self.per_class[name]
        except KeyError:
            raise KeyError(f"model has no class {name!r}; known: {sorted(self.per_class)}") from None


def accumulate(img: np.ndarray, mask: np.ndarray, hist: ColorHistogram) -> ColorHistogram:
    """Add the colors of mask-true pixels to ``hist`` (in place) and return it."""
    if img.shape[:2] != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {img.shape[:2]}")
    if hist.bins != 256:
        raise ValueError("histograms over 8-bit channels need 256 bins")
    px = img[mask]
    for c in range(3):
        hist.counts[c] += np.bincount(px[:, c], minlength=256)
    return hist


def derive_range(hist: ColorHistogram, pct_lo: float, pct_hi: float) -> ColorRange:
    """Per-channel percentile bounds: the smallest bin whose cumulative
    count reaches the requested share of the total (and is non-zero, so a
    0th percentile lands on the first occupied bin)."""
    if not 0 <= pct_lo < pct_hi <= 100:
        raise ValueError("need 0 <= pct_lo < pct_hi <= 100")
    total = hist.total
    if total == 0:
        raise ValueError("cannot derive a range from an empty histogram")
    lo, hi = [], []
    for c in range(3):
        cum = np.cumsum(hist.counts[c])
        lo.append(int(np.argmax((cum * 100.0 >= pct_lo * total) & (cum > 0))))
        hi.append(int(np.argmax((cum * 100.0 >= pct_hi * total) & (cum > 0))))
    return ColorRange(tuple(lo), tuple(hi))


def envelope(ranges) -> ColorRange:
    ranges = list(ranges)
    if not ranges:
        raise ValueError("envelope of no ranges")
    lo = np.min([r.lo for r in ranges], axis=0)
    hi = np.max([r.hi for r in ranges], axis=0)
    return ColorRange(tuple(lo), tuple(hi))


def model_from_histograms(hists: dict, pct_lo: float = 1.0, pct_hi: float = 99.0) -> LesionColorModel:
    """Build a model from per-class histograms; empty classes are skipped."""
    per_class = {name: derive_range(h, pct_lo, pct_hi) for name, h in hists.items() if h.total > 0}
    if not per_class:
        raise ValueError("no lesion pixels in any training sample")
    counts = {name: h.total for name, h in hists.items()}
    return LesionColorModel(
        combined=envelope(per_class.values()),
        per_class=dict(sorted(per_class.items())),
        bins=256,
        percentile_lo=float(pct_lo),
        percentile_hi=float(pct_hi),
        pixel_counts=dict(sorted(counts.items())),
    )


def train(samples, pct_lo: float = 1.0, pct_hi: float = 99.0) -> LesionColorModel:
    """Train from ``(image, mask, class_name)`` triples.

    ``class_name`` of ``None`` goes to the ``"unlabeled"`` class, which joins
    the combined envelope like any other.
    """
    hists: dict[str, ColorHistogram] = {}
    n = 0
    for img, mask, name in samples:
        n += 1
        key = name or UNLABELED
        accumulate(img, mask, hists.setdefault(key, ColorHistogram()))
    if n == 0:
        raise ValueError("train needs at least one sample")
    return model_from_histograms(hists, pct_lo, pct_hi)


def pixel_in_range(pixel, rng: ColorRange) -> bool:
    return all(lo <= int(v) <= hi for v, lo, hi in zip(pixel, rng.lo, rng.hi))


def in_range_mask(img: np.ndarray, rng: ColorRange) -> np.ndarray:
    """Vectorized :func:`pixel_in_range` over an ``(..., 3)`` array."""
    lo = np.array(rng.lo)
    hi = np.array(rng.hi)
    return np.all((img >= lo) & (img <= hi), axis=-1)


def fraction_in_range(img: np.ndarray, pixel_ids, rng: ColorRange) -> float:
    ids = np.asarray(pixel_ids, dtype=np.intp)
    if ids.size == 0:
        return 0.0
    px = img.reshape(-1, 3)[ids]
    return float(in_range_mask(px, rng).mean())


def save_model(model: LesionColorModel) -> bytes:
    doc = {
        "version": MODEL_VERSION,
        "bins": model.bins,
        "percentile_lo": model.percentile_lo,
        "percentile_hi": model.percentile_hi,
        "combined": model.combined.to_json(),
        "per_class": {k: v.to_json() for k, v in model.per_class.items()},
    }
    if model.pixel_counts:
        doc["pixel_counts"] = model.pixel_counts
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _range_from_json(obj) -> ColorRange:
    return ColorRange(tuple(obj["lo"]), tuple(obj["hi"]))


def load_model(data: bytes | str) -> LesionColorModel:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValueError(f"malformed model document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("model document must be a JSON object")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    try:
        model = LesionColorModel(
            combined=_range_from_json(doc["combined"]),
            per_class={k: _range_from_json(v) for k, v in doc.get("per_class", {}).items()},
            bins=int(doc.get("bins", 256)),
            percentile_lo=float(doc.get("percentile_lo", 1.0)),
            percentile_hi=float(doc.get("percentile_hi", 99.0)),
            pixel_counts={k: int(v) for k, v in doc.get("pixel_counts", {}).items()},
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed model document: missing or bad field {exc}") from exc
    for name, rng in model.per_class.items():
        if not model.combined.contains(rng):
            raise ValueError(f"combined range does not contain class {name!r}")
    return model
