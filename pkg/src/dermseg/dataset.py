"""Dataset discovery: images, paired ground-truth masks and class labels."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

IMAGE_SUFFIXES = (".jpg", ".jpeg")
MASK_SUFFIX = "_segmentation.png"
LABELS_FILE = "labels.csv"


class DataError(Exception):
    """Unusable input data (missing directory, duplicate ids, bad files)."""


@dataclass(frozen=True)
class DatasetEntry:
    image_id: str
    image_path: Path
    mask_path: Path | None = None
    class_name: str | None = None


def _mask_dirs(root: Path) -> list[Path]:
    dirs = [root, root / "masks"]
    parent = root.parent
    if parent != root and parent.is_dir():
        for d in sorted(parent.iterdir()):
            name = d.name.lower()
            if d.is_dir() and d != root and ("mask" in name or "groundtruth" in name):
                dirs.append(d)
    return [d for d in dirs if d.is_dir()]


def _read_labels(path: Path) -> dict:
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"image_id", "class"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected columns image_id,class")
        for row in reader:
            labels[row["image_id"].strip()] = row["class"].strip() or None
    return labels


def index_dataset(root) -> list[DatasetEntry]:
    """Index ``*.jpg`` images under ``root`` (non-recursive), sorted by id.

    The mask of ``X.jpg`` is ``X_segmentation.png`` in ``root``, in
    ``root/masks`` or in a sibling directory whose name mentions "mask" or
    "GroundTruth". Optional ``labels.csv`` (image_id,class) sets classes.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset directory {root} does not exist")
    try:
        files = sorted(p for p in root.iterdir() if p.is_file())
    except OSError as exc:
        raise DataError(f"cannot read {root}: {exc}") from exc
    images = {}
    for p in files:
        if p.suffix.lower() in IMAGE_SUFFIXES:
            if p.stem in images:
                raise DataError(f"duplicate image id {p.stem!r} in {root}")
            images[p.stem] = p
    labels = _read_labels(root / LABELS_FILE) if (root / LABELS_FILE).is_file() else {}
    mask_dirs = _mask_dirs(root)
    entries = []
    for image_id in sorted(images):
        mask = None
        for d in mask_dirs:
            cand = d / f"{image_id}{MASK_SUFFIX}"
            if cand.is_file():
                mask = cand
                break
        entries.append(DatasetEntry(image_id, images[image_id], mask, labels.get(image_id)))
    return entries
