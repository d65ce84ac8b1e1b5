"""Cross-temporal evidence: propagation, stable regions, exemplar pooling.

The two temporal directions are independent: a mask is tracked over the
bridged sequence toward the other acquisition, regions that survive with
high confidence are pooled into a visual exemplar, and the exemplar rides
along with the text prompts when that acquisition is decoded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .backends.base import FeatureMap, MaskPropagator, validate_confidence
from .bridge import BridgedSequence
from .errors import BackendError, DimensionMismatch
from .query import Exemplar, PromptSpec, QuerySpec
from .raster import BitMask, ScalarMap, connected_components, intersect

PropagationDirection = Literal["1to2", "2to1"]

_DIRECTION_FROM_SEQUENCE = {"forward": "1to2", "backward": "2to1"}


@dataclass
class PropagationResult:
    propagated_mask: BitMask
    confidence: ScalarMap
    direction: PropagationDirection


@dataclass
class StableRegion:
    """Pixels that stayed band-consistent through propagation; pixels is an
    (n, 2) array of (row, col)."""

    pixels: np.ndarray
    alpha: float
    source_direction: PropagationDirection

    def __post_init__(self) -> None:
        if len(self.pixels) == 0:
            raise ValueError("stable region must be nonempty")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"region confidence must be in [0, 1], got {self.alpha}")


def propagate(
    init_mask: BitMask, seq: BridgedSequence, tracker: MaskPropagator
) -> PropagationResult:
    """Track ``init_mask`` over ``seq`` and return the final-frame hypothesis.

    An empty prompt mask short-circuits to an empty result without touching
    the backend.
    """
    if len(seq.frames) < 2:
        raise ValueError(f"bridged sequence needs at least 2 frames, got {len(seq.frames)}")
    first = seq.frames[0]
    last = seq.frames[-1]
    if init_mask.shape != first.shape:
        raise DimensionMismatch(
            f"prompt mask {init_mask.shape} does not match frame {first.shape}"
        )
    direction: PropagationDirection = _DIRECTION_FROM_SEQUENCE[seq.direction]

    if init_mask.area() == 0:
        return PropagationResult(
            BitMask.zeros(last.width, last.height),
            ScalarMap.zeros(last.width, last.height),
            direction,
        )

    try:
        mask, confidence = tracker.propagate(init_mask, seq.frames)
    except BackendError as exc:
        raise BackendError(f"propagation over {len(seq.frames)} frames failed: {exc}") from exc
    except Exception as exc:
        raise BackendError(f"propagation over {len(seq.frames)} frames failed: {exc}") from exc

    confidence = validate_confidence(
        confidence.values, last.width, last.height, f"propagation ({direction})"
    )
    if mask.shape != last.shape:
        raise BackendError(
            f"propagated mask {mask.shape} does not match final frame {last.shape}"
        )
    return PropagationResult(mask, confidence, direction)


def extract_stable_regions(
    prop: PropagationResult, dst_coarse: BitMask, c_min: float
) -> list[StableRegion]:
    """Components of (propagated mask AND destination coarse mask) whose mean
    confidence reaches ``c_min``."""
    agreement = intersect(prop.propagated_mask, dst_coarse)
    regions: list[StableRegion] = []
    for comp in connected_components(agreement, 8).components:
        mean_conf = float(prop.confidence.values[comp.pixels[:, 0], comp.pixels[:, 1]].mean())
        if mean_conf >= c_min:
            regions.append(StableRegion(comp.pixels, mean_conf, prop.direction))
    return regions


def pool_region_feature(region: StableRegion, features: FeatureMap) -> np.ndarray:
    """Pixel-weighted mean of the feature cells covered by the region."""
    rows = region.pixels[:, 0]
    cols = region.pixels[:, 1]
    cell_rows = rows // features.stride
    cell_cols = cols // features.stride
    if (cell_rows >= features.grid_height).any() or (cell_cols >= features.grid_width).any():
        raise ValueError("region pixels fall outside the feature grid")
    vectors = features.values[cell_rows, cell_cols]
    assert len(vectors) > 0
    return vectors.mean(axis=0)


def aggregate_exemplar(
    regions: Sequence[StableRegion],
    features: Sequence[np.ndarray],
    weighted: bool = True,
) -> Optional[Exemplar]:
    """Confidence-weighted mean of region features; equal-weight mode forces
    every weight to 1. Returns None when there is no usable evidence (the
    caller falls back to a text-only prompt)."""
    if len(regions) != len(features):
        raise ValueError(f"{len(regions)} regions but {len(features)} feature vectors")
    if not regions:
        return None
    alphas = np.array([r.alpha for r in regions] if weighted else [1.0] * len(regions))
    mass = float(alphas.sum())
    if mass <= 0.0:
        return None
    stacked = np.stack([np.asarray(f, dtype=np.float64) for f in features])
    vector = (alphas[:, None] * stacked).sum(axis=0) / mass
    return Exemplar(vector=vector, weight_mass=mass, direction=regions[0].source_direction)


def build_prompt(query: QuerySpec, exemplar: Optional[Exemplar], replication: int) -> PromptSpec:
    """Assemble the backend prompt: all synonyms plus the replicated exemplar."""
    return PromptSpec(
        text_prompts=list(query.prompts),
        exemplar=exemplar,
        replication=replication if exemplar is not None else 0,
    )
