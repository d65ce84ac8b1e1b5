"""Training-free open-vocabulary change detection over bi-temporal imagery."""

from .bridge import BridgedSequence, build_bridged_sequence, histogram_match
from .decoding import ChangeResult, InstanceSet, decode_change, decode_semantic, match_instances, select_best_prompt
from .memory import (
    PropagationResult,
    StableRegion,
    aggregate_exemplar,
    build_prompt,
    extract_stable_regions,
    pool_region_feature,
    propagate,
)
from .metrics import ConfusionCounts, MetricSet, aggregate, compute_metrics
from .pipeline import PipelineConfig, PipelineOutputs, run_pipeline
from .query import Exemplar, PromptSpec, QuerySpec
from .raster import (
    BitMask,
    LabeledComponents,
    RasterImage,
    ScalarMap,
    connected_components,
    filter_by_area,
    intersect,
    mask_area,
    mask_iou,
    union,
)
from .rectify import RectificationParams, coverage_ratio, fusion_weight, rectify
from .tiling import QueryLogits, TilePlan, plan_tiles, run_global, run_local

__version__ = "0.1.0"

__all__ = [
    "BitMask",
    "BridgedSequence",
    "ChangeResult",
    "ConfusionCounts",
    "Exemplar",
    "InstanceSet",
    "LabeledComponents",
    "MetricSet",
    "PipelineConfig",
    "PipelineOutputs",
    "PromptSpec",
    "PropagationResult",
    "QueryLogits",
    "QuerySpec",
    "RasterImage",
    "RectificationParams",
    "ScalarMap",
    "StableRegion",
    "TilePlan",
    "aggregate",
    "aggregate_exemplar",
    "build_bridged_sequence",
    "build_prompt",
    "compute_metrics",
    "connected_components",
    "coverage_ratio",
    "decode_change",
    "decode_semantic",
    "extract_stable_regions",
    "filter_by_area",
    "fusion_weight",
    "histogram_match",
    "intersect",
    "mask_area",
    "mask_iou",
    "match_instances",
    "plan_tiles",
    "pool_region_feature",
    "propagate",
    "rectify",
    "run_global",
    "run_local",
    "run_pipeline",
    "select_best_prompt",
    "union",
]
