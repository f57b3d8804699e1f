"""Multi-sensor deforestation mask fusion."""

from .cloud import CloudRule, cloud_fraction, screen_clouds
from .fusion import (
    FusionConfig,
    NoDataError,
    WeightedMask,
    assign_weights,
    ensemble_threshold,
    fuse_query,
    sigma_filter,
    weighted_average,
)
from .ingest import Manifest, ManifestEntry, QueryKey, group_by_query, load_manifest, read_raster, write_raster
from .metrics import ConfusionCounts, MetricsReport, aggregate, confusion, f1, iou, pixel_accuracy
from .morphology import StructElement, dilate, erode, opening
from .pipeline import PipelineConfig, evaluate, run_ablation, run_pipeline
from .preprocess import ClipSpec, percentile_clip_normalize, select_bands
from .providers import FileBackedProvider, HeuristicBaseline, heuristic_baseline, provide
from .raster import (
    BinaryMask,
    ImageMeta,
    MultiBandImage,
    NormalizedImage,
    ProbMask,
    SatelliteSource,
    mask_ratio,
    pixel_at,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "ClipSpec",
    "CloudRule",
    "ConfusionCounts",
    "FileBackedProvider",
    "FusionConfig",
    "HeuristicBaseline",
    "ImageMeta",
    "Manifest",
    "ManifestEntry",
    "MetricsReport",
    "MultiBandImage",
    "NoDataError",
    "NormalizedImage",
    "PipelineConfig",
    "ProbMask",
    "QueryKey",
    "SatelliteSource",
    "StructElement",
    "WeightedMask",
    "aggregate",
    "assign_weights",
    "cloud_fraction",
    "confusion",
    "dilate",
    "ensemble_threshold",
    "erode",
    "evaluate",
    "f1",
    "fuse_query",
    "group_by_query",
    "heuristic_baseline",
    "iou",
    "load_manifest",
    "mask_ratio",
    "opening",
    "percentile_clip_normalize",
    "pixel_accuracy",
    "pixel_at",
    "provide",
    "read_raster",
    "run_ablation",
    "run_pipeline",
    "screen_clouds",
    "select_bands",
    "sigma_filter",
    "weighted_average",
    "write_raster",
]
