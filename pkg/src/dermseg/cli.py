"""Batch command line: train / segment / evaluate / pipeline.

Exit codes: 0 success, 1 usage, 2 data error, 3 some images failed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import _kernels
from . import config as cfgmod
from .colormodel import ColorHistogram, accumulate, load_model, model_from_histograms, save_model
from .config import PipelineConfig
from .dataset import MASK_SUFFIX, DataError, index_dataset
from .evaluation import evaluate_dataset, image_metrics_dict, report_csv, report_json
from .imgcore import (
    downscaled_size,
    mask_boundary,
    maybe_downscale,
    maybe_downscale_mask,
    read_mask,
    read_rgb,
    resize_nearest,
    write_mask,
    write_rgb,
)
from .preprocess import preprocess_image
from .segment import segment_image

log = logging.getLogger("dermseg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
PRED_SUFFIX = "_pred.png"
OVERLAY_SUFFIX = "_overlay.png"
MANIFEST = "manifest.json"
WORKERS_ENV = "DERMSEG_WORKERS"


def resolve_workers(cfg: PipelineConfig, override: int | None = None) -> int:
    if override is not None:
        return max(1, override)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DataError(f"{WORKERS_ENV}={env!r} is not an integer") from None
    return max(1, int(cfg.workers))


def _map(fn, items, workers: int):
    """Ordered map, in-process for one worker."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- train ----------------------------------------------------------------------

def _train_one(args):
    entry, cfg = args
    img = read_rgb(entry.image_path)
    mask = read_mask(entry.mask_path)
    if mask.shape != img.shape[:2]:
        raise DataError(
            f"{entry.image_id}: mask {mask.shape[::-1]} does not match image {img.shape[1::-1]}"
        )
    pp = cfg.preprocess
    mask = maybe_downscale_mask(mask, pp.downscale_threshold, pp.downscale_factor)
    img, _ = preprocess_image(img, pp)
    return accumulate(img, mask, ColorHistogram())


def cmd_train(cfg: PipelineConfig, entries, out_path, workers: int = 1, echo=print):
    """Learn the lesion color model from every entry that has a mask."""
    usable = [e for e in entries if e.mask_path is not None]
    if not usable:
        raise DataError("no training images with ground-truth masks")
    hists = _map(_train_one, [(e, cfg) for e in usable], workers)
    per_class: dict[str, ColorHistogram] = {}
    for e, h in zip(usable, hists):
        key = e.class_name or "unlabeled"
        per_class[key] = per_class[key] + h if key in per_class else h
    try:
        model = model_from_histograms(
            per_class, cfg.colormodel.percentile_lo, cfg.colormodel.percentile_hi
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(save_model(model))
    for name, count in model.pixel_counts.items():
        echo(f"{name}: {count} lesion pixels")
    echo(f"combined range lo={list(model.combined.lo)} hi={list(model.combined.hi)}")
    return model


# -- segment --------------------------------------------------------------------

def overlay(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = img.copy()
    out[mask_boundary(mask)] = (255, 0, 0)
    return out


def _segment_one(args):
    entry, cfg, model, out_dir = args
    rec = {"image_id": entry.image_id, "status": "ok"}
    try:
        original = read_rgb(entry.image_path)
        pp = cfg.preprocess
        img, hair = preprocess_image(original, pp)
        res = segment_image(img, model, cfg.segment)
        out_dir = Path(out_dir)
        write_mask(out_dir / f"{entry.image_id}{PRED_SUFFIX}", res.mask)
        shown = maybe_downscale(original, pp.downscale_threshold, pp.downscale_factor)
        write_rgb(out_dir / f"{entry.image_id}{OVERLAY_SUFFIX}", overlay(shown, res.mask),
                  format="PNG")
        rec.update(
            original_size=[int(original.shape[1]), int(original.shape[0])],
            processing_size=[int(img.shape[1]), int(img.shape[0])],
            hair_pixels=int(hair.sum()),
            kmeans_iterations=res.clusters.iterations,
            selected_clusters=[int(c) for c in res.selected_clusters],
            seeds=[
                {
                    "cluster": s.source_cluster,
                    "centroid": [s.centroid_seed.x, s.centroid_seed.y],
                    "boundary": [s.boundary_seed.x, s.boundary_seed.y],
                    "boundary_used": s.boundary_used,
                }
                for s in res.seeds
            ],
            no_cluster_selected=res.no_cluster_selected,
            fallback_used=res.fallback_used,
            lesion_pixels=int(res.mask.sum()),
        )
    except Exception as exc:  # noqa: BLE001 - one bad image must not stop the batch
        rec["status"] = "error"
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def cmd_segment(cfg: PipelineConfig, entries, model_path, out_dir, workers: int = 1,
                data_ref=None, model_ref=None, echo=print):
    """Segment every entry; returns the run manifest (also written to disk)."""
    model_path = Path(model_path)
    try:
        model = load_model(model_path.read_bytes())
    except OSError as exc:
        raise DataError(f"cannot read model {model_path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{model_path}: {exc}") from exc
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = _map(_segment_one, [(e, cfg, model, str(out_dir)) for e in entries], workers)
    failures = [r for r in records if r["status"] != "ok"]
    manifest = {
        "command": "segment",
        "data": data_ref,
        "model": model_ref if model_ref is not None else str(model_path),
        "model_sha256": _sha256(model_path),
        "config": json.loads(cfgmod.dumps(cfg, drop_runtime=True)),
        "backend": _kernels.BACKEND,
        "images": records,
        "failures": len(failures),
    }
    _write_json(out_dir / MANIFEST, manifest)
    flagged = sum(1 for r in records if r.get("no_cluster_selected"))
    echo(f"segmented {len(records) - len(failures)}/{len(records)} images"
         f" ({flagged} without a lesion cluster)")
    for r in failures:
        echo(f"FAILED {r['image_id']}: {r['error']}")
    return manifest


# -- evaluate -------------------------------------------------------------------

def _align(pred: np.ndarray, gt: np.ndarray, cfg: PipelineConfig, image_id: str):
    if pred.shape == gt.shape:
        return pred, gt
    pp = cfg.preprocess
    gh, gw = gt.shape
    if downscaled_size(gw, gh, pp.downscale_threshold, pp.downscale_factor) == pred.shape[::-1]:
        if cfg.evaluate.score_at_original:
            return resize_nearest(pred, gw, gh), gt
        return pred, maybe_downscale_mask(gt, pp.downscale_threshold, pp.downscale_factor)
    raise DataError(
        f"{image_id}: prediction {pred.shape[::-1]} and ground truth {gt.shape[::-1]} sizes differ"
    )


def cmd_evaluate(cfg: PipelineConfig, pred_dir, gt_dir, out_dir, gt_paths=None, echo=print):
    """Score ``<id>_pred.png`` files against ``<id>_segmentation.png`` ground truth.

    ``gt_paths`` (id -> path) overrides the lookup in ``gt_dir``.
    """
    pred_dir = Path(pred_dir)
    if not pred_dir.is_dir():
        raise DataError(f"prediction directory {pred_dir} does not exist")
    preds = {p.name[: -len(PRED_SUFFIX)]: p for p in sorted(pred_dir.glob(f"*{PRED_SUFFIX}"))}
    if gt_paths is None:
        gt_dir = Path(gt_dir)
        if not gt_dir.is_dir():
            raise DataError(f"ground-truth directory {gt_dir} does not exist")
        gt_paths = {p.name[: -len(MASK_SUFFIX)]: p for p in sorted(gt_dir.glob(f"*{MASK_SUFFIX}"))}
    unmatched = sorted(set(preds) - set(gt_paths))
    if unmatched:
        raise DataError(f"predictions without ground truth: {', '.join(unmatched)}")
    if not preds:
        raise DataError(f"no *{PRED_SUFFIX} files in {pred_dir}")
    missing = sorted(set(gt_paths) - set(preds))
    ids = sorted(preds)
    pairs = []
    for image_id in ids:
        pred = read_mask(preds[image_id])
        gt = read_mask(gt_paths[image_id])
        pairs.append(_align(pred, gt, cfg, image_id))
    resolution = "original" if cfg.evaluate.score_at_original else "processing"
    report = evaluate_dataset(pairs, ids, resolution=resolution)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.csv").write_text(report_csv(report), encoding="utf-8")
    summary = report.summary()
    summary["missing_predictions"] = missing
    (out_dir / "metrics.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name, value in report.means.items():
        echo(f"{name:12s} {value:.4f}")
    echo(f"{'overall':12s} {report.overall:.4f}")
    if missing:
        echo(f"warning: {len(missing)} ground-truth masks had no prediction: {', '.join(missing)}")
    return report


# -- pipeline -------------------------------------------------------------------

def cmd_pipeline(cfg: PipelineConfig, train_dir, eval_dir, out_dir, workers: int = 1, echo=print):
    """Train on ``train_dir``, segment ``eval_dir`` and score it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_entries = index_dataset(train_dir)
    eval_entries = index_dataset(eval_dir)
    model_path = out_dir / "model.json"
    cmd_train(cfg, train_entries, model_path, workers, echo=echo)
    manifest = cmd_segment(cfg, eval_entries, model_path, out_dir / "masks", workers,
                           data_ref=str(eval_dir), model_ref="model.json", echo=echo)
    gt = {e.image_id: e.mask_path for e in eval_entries if e.mask_path is not None}
    report = None
    if gt:
        report = cmd_evaluate(cfg, out_dir / "masks", None, out_dir / "metrics",
                              gt_paths=gt, echo=echo)
    else:
        echo("no ground truth in the evaluation set; skipping scoring")
    _write_json(out_dir / MANIFEST, {
        "command": "pipeline",
        "train": str(train_dir),
        "eval": str(eval_dir),
        "config": json.loads(cfgmod.dumps(cfg, drop_runtime=True)),
        "backend": _kernels.BACKEND,
        "model_sha256": _sha256(model_path),
        "failures": manifest["failures"],
        "overall": report.overall if report else None,
    })
    return manifest, report


# -- argument handling ----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_args(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. segment.kmeans.k=5")
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default: config or ${WORKERS_ENV})")


def build_parser():
    parser = _Parser(prog="dermseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="learn the lesion color model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    _add_config_args(p)

    p = sub.add_parser("segment", help="segment a directory of images")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--class", dest="class_name", default=None,
                   help="use this class range instead of the combined envelope")
    _add_config_args(p)

    p = sub.add_parser("evaluate", help="score predicted masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    _add_config_args(p)

    p = sub.add_parser("pipeline", help="train, segment and evaluate in one go")
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--out", required=True)
    _add_config_args(p)

    p = sub.add_parser("replay", help="re-run a segment or pipeline manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("config", help="show configuration")
    p.add_argument("--print-defaults", action="store_true")
    return parser


def _load_config(args) -> PipelineConfig:
    cfg = cfgmod.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    cfg = cfgmod.apply_overrides(cfg, getattr(args, "set", []))
    if getattr(args, "class_name", None):
        cfg.segment.class_name = args.class_name
    return cfg


def _replay(args) -> int:
    doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    cfg = cfgmod.from_dict(doc["config"])
    workers = resolve_workers(cfg, args.workers)
    if doc.get("command") == "pipeline":
        manifest, _ = cmd_pipeline(cfg, doc["train"], doc["eval"], args.out, workers)
    elif doc.get("command") == "segment":
        model = Path(doc["model"])
        if not model.is_absolute() and not model.exists():
            model = Path(args.manifest).parent / model
        if _sha256(model) != doc["model_sha256"]:
            raise DataError(f"model {model} does not match the manifest checksum")
        manifest = cmd_segment(cfg, index_dataset(doc["data"]), model, args.out, workers,
                               data_ref=doc["data"], model_ref=doc["model"])
    else:
        raise DataError(f"{args.manifest}: unknown command {doc.get('command')!r}")
    return EXIT_PARTIAL if manifest["failures"] else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "config":
            sys.stdout.write(cfgmod.dumps(PipelineConfig()))
            return EXIT_OK
        if args.command == "replay":
            return _replay(args)
        try:
            cfg = _load_config(args)
        except (ValueError, OSError) as exc:
            print(f"dermseg: config error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        workers = resolve_workers(cfg, args.workers)
        if args.command == "train":
            cmd_train(cfg, index_dataset(args.data), args.out, workers)
            return EXIT_OK
        if args.command == "segment":
            manifest = cmd_segment(cfg, index_dataset(args.data), args.model, args.out, workers,
                                   data_ref=args.data)
            return EXIT_PARTIAL if manifest["failures"] else EXIT_OK
        if args.command == "evaluate":
            cmd_evaluate(cfg, args.pred, args.gt, args.out)
            return EXIT_OK
        if args.command == "pipeline":
            manifest, _ = cmd_pipeline(cfg, args.train, args.eval, args.out, workers)
            return EXIT_PARTIAL if manifest["failures"] else EXIT_OK
    except DataError as exc:
        print(f"dermseg: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
