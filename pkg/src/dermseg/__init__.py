"""Skin lesion segmentation for dermoscopic images.

Preprocessing (downscaling, CLAHE on Lab lightness, Frangi-based hair
removal) followed by k-means color clustering, histogram-learned lesion
color ranges and dual-seed flood fill.
"""
from ._kernels import BACKEND
from .cluster import ClusterResult, KMeansParams, kmeans, select_lesion_clusters
from .colormodel import ColorRange, LesionColorModel, load_model, save_model, train
from .config import PipelineConfig
from .evaluation import confusion, evaluate_dataset, metrics
from .imgcore import read_mask, read_rgb
from .preprocess import preprocess_image
from .segment import SegmentParams, segment_image

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClusterResult",
    "ColorRange",
    "KMeansParams",
    "LesionColorModel",
    "PipelineConfig",
    "SegmentParams",
    "confusion",
    "evaluate_dataset",
    "kmeans",
    "load_model",
    "metrics",
    "preprocess_image",
    "read_mask",
    "read_rgb",
    "save_model",
    "segment_image",
    "select_lesion_clusters",
    "train",
]
