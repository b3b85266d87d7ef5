"""Challenge-style segmentation scores."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

METRIC_NAMES = ("jaccard", "dice", "sensitivity", "specificity", "accuracy")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class ImageMetrics:
    jaccard: float
    dice: float
    sensitivity: float
    specificity: float
    accuracy: float
    image_id: str = ""

    @property
    def overall(self) -> float:
        return sum(getattr(self, m) for m in METRIC_NAMES) / len(METRIC_NAMES)


@dataclass
class MetricsReport:
    per_image: list = field(default_factory=list)
    means: dict = field(default_factory=dict)
    overall: float = 0.0
    resolution: str = "processing"

    def summary(self) -> dict:
        return {
            "n_images": len(self.per_image),
            "means": dict(self.means),
            "overall": self.overall,
            "resolution": self.resolution,
        }


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    pred = pred.astype(bool)
    gt = gt.astype(bool)
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return ConfusionCounts(tp, fp, fn, pred.size - tp - fp - fn)


def _ratio(num: int, den: int) -> float:
    # a zero denominator means the quantity is vacuous (e.g. both masks empty)
    return 1.0 if den == 0 else num / den


def metrics(counts: ConfusionCounts, image_id: str = "") -> ImageMetrics:
    if counts.total <= 0:
        raise ValueError("confusion counts are empty")
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    return ImageMetrics(
        jaccard=_ratio(tp, tp + fp + fn),
        dice=_ratio(2 * tp, 2 * tp + fp + fn),
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        accuracy=(tp + tn) / counts.total,
        image_id=image_id,
    )


def evaluate_dataset(pairs, ids=None, resolution: str = "processing") -> MetricsReport:
    """Per-image scores and their unweighted means, in input order."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no prediction/ground-truth pairs to evaluate")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(pairs))]
    per_image = []
    for image_id, (pred, gt) in zip(ids, pairs):
        try:
            per_image.append(metrics(confusion(pred, gt), image_id))
        except ValueError as exc:
            raise ValueError(f"{image_id}: {exc}") from exc
    means = {m: float(np.mean([getattr(r, m) for r in per_image])) for m in METRIC_NAMES}
    overall = sum(means.values()) / len(METRIC_NAMES)
    return MetricsReport(per_image, means, overall, resolution)


def report_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("image_id",) + METRIC_NAMES)
    for r in report.per_image:
        writer.writerow([r.image_id] + [repr(getattr(r, m)) for m in METRIC_NAMES])
    return buf.getvalue()


def report_json(report: MetricsReport) -> str:
    return json.dumps(report.summary(), indent=2, sort_keys=True) + "\n"


def image_metrics_dict(m: ImageMetrics) -> dict:
    d = asdict(m)
    d["overall"] = m.overall
    return d
