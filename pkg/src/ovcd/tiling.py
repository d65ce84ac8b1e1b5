"""Tiled local inference and full-image global inference.

High-resolution images are segmented patch-wise on an overlapping grid and
the per-tile logit maps are merged back to image size; a separate full-image
pass (optionally at reduced resolution) provides the global view.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from PIL import Image

from .backends.base import Segmenter
from .errors import BackendError, ConfigError
from .query import PromptSpec
from .raster import BitMask, RasterImage, ScalarMap

MergeRule = Literal["mean", "max"]


@dataclass(frozen=True)
class TilePlan:
    """Overlapping tile rectangles (x, y, w, h) covering the whole image."""

    tile_size: int
    stride: int
    rects: tuple[tuple[int, int, int, int], ...]


@dataclass
class InferencePass:
    logits: ScalarMap
    support: BitMask  # logits > 0
    presence: dict[str, float]


@dataclass
class QueryLogits:
    """Per-timestamp inference state for one query: the merged local map,
    the optional global map, their supports, and combined presence scores
    (max over tiles and the global pass)."""

    local: ScalarMap
    support_local: BitMask
    presence: dict[str, float]
    global_: "ScalarMap | None" = None
    support_global: "BitMask | None" = None

    @classmethod
    def from_passes(cls, local: InferencePass, global_pass: "InferencePass | None") -> "QueryLogits":
        presence = dict(local.presence)
        if global_pass is not None:
            for prompt, score in global_pass.presence.items():
                presence[prompt] = max(presence.get(prompt, 0.0), score)
        return cls(
            local=local.logits,
            support_local=local.support,
            presence=presence,
            global_=None if global_pass is None else global_pass.logits,
            support_global=None if global_pass is None else global_pass.support,
        )


def _axis_positions(extent: int, tile: int, stride: int) -> list[int]:
    positions = list(range(0, extent - tile + 1, stride))
    if positions[-1] != extent - tile:
        positions.append(extent - tile)  # clamp the last tile flush to the edge
    return positions


def plan_tiles(width: int, height: int, tile_size: int, stride: int) -> TilePlan:
    """Grid positions at stride multiples, last row/column clamped flush.

    An image smaller than the tile in either dimension gets one full-image
    rectangle.
    """
    if tile_size < 1:
        raise ConfigError(f"tile size must be >= 1, got {tile_size}")
    if stride < 1 or stride > tile_size:
        raise ConfigError(f"stride must be in 1..tile_size, got {stride}")
    if tile_size > width or tile_size > height:
        return TilePlan(tile_size, stride, ((0, 0, width, height),))
    rects = tuple(
        (x, y, tile_size, tile_size)
        for y in _axis_positions(height, tile_size, stride)
        for x in _axis_positions(width, tile_size, stride)
    )
    return TilePlan(tile_size, stride, rects)


def _segment_tile(segmenter, image, prompt, index, rect):
    x, y, w, h = rect
    try:
        logits, presence = segmenter.segment(image.crop(x, y, w, h), prompt)
    except Exception as exc:
        raise BackendError(f"segmentation failed on tile {index} rect {rect}: {exc}") from exc
    if logits.shape != (h, w):
        raise BackendError(f"tile {index}: backend returned {logits.shape}, expected {(h, w)}")
    return logits, presence


def run_local(
    image: RasterImage,
    prompt: PromptSpec,
    plan: TilePlan,
    segmenter: Segmenter,
    merge_rule: MergeRule = "mean",
) -> InferencePass:
    """Segment every tile and merge into an image-sized local logit map.

    mean: unweighted average over the tiles covering each pixel; max: the
    strongest covering response. Per-prompt presence is the max over tiles.
    Tiles run through a bounded worker pool sized by the backend's declared
    concurrency; the reduction is in fixed tile order, so results do not
    depend on completion order.
    """
    if merge_rule not in ("mean", "max"):
        raise ConfigError(f"unknown merge rule {merge_rule!r}")

    h, w = image.shape
    workers = min(max(1, segmenter.capabilities().max_concurrency), len(plan.rects))
    if workers > 1 and len(plan.rects) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_segment_tile, segmenter, image, prompt, i, rect)
                for i, rect in enumerate(plan.rects)
            ]
            tile_results = [f.result() for f in futures]
    else:
        tile_results = [
            _segment_tile(segmenter, image, prompt, i, rect) for i, rect in enumerate(plan.rects)
        ]

    presence: dict[str, float] = {p: 0.0 for p in prompt.text_prompts}
    if merge_rule == "mean":
        acc = np.zeros((h, w), dtype=np.float64)
        counts = np.zeros((h, w), dtype=np.int32)
        for rect, (logits, tile_presence) in zip(plan.rects, tile_results):
            x, y, tw, th = rect
            acc[y : y + th, x : x + tw] += logits.values
            counts[y : y + th, x : x + tw] += 1
            for p in prompt.text_prompts:
                presence[p] = max(presence[p], tile_presence.get(p, 0.0))
        merged = (acc / counts).astype(np.float32)
    else:
        merged = np.full((h, w), -np.inf, dtype=np.float32)
        for rect, (logits, tile_presence) in zip(plan.rects, tile_results):
            x, y, tw, th = rect
            region = merged[y : y + th, x : x + tw]
            np.maximum(region, logits.values, out=region)
            for p in prompt.text_prompts:
                presence[p] = max(presence[p], tile_presence.get(p, 0.0))

    logits = ScalarMap(merged)
    return InferencePass(logits=logits, support=BitMask(merged > 0.0), presence=presence)


def run_global(
    image: RasterImage,
    prompt: PromptSpec,
    segmenter: Segmenter,
    downscale: float = 1.0,
) -> InferencePass:
    """One full-image pass, optionally at reduced resolution with bilinear
    logit upsampling back to native size."""
    if not 0.0 < downscale <= 1.0:
        raise ConfigError(f"downscale must be in (0, 1], got {downscale}")

    h, w = image.shape
    if downscale == 1.0:
        try:
            logits, presence = segmenter.segment(image, prompt)
        except Exception as exc:
            raise BackendError(f"global segmentation failed: {exc}") from exc
        if logits.shape != (h, w):
            raise BackendError(f"global pass returned {logits.shape}, expected {(h, w)}")
    else:
        sw = max(1, round(w * downscale))
        sh = max(1, round(h * downscale))
        small = Image.fromarray(image.data, mode="RGB").resize((sw, sh), Image.BILINEAR)
        try:
            logits, presence = segmenter.segment(RasterImage(np.asarray(small)), prompt)
        except Exception as exc:
            raise BackendError(f"global segmentation failed at downscale {downscale}: {exc}") from exc
        if logits.shape != (sh, sw):
            raise BackendError(f"global pass returned {logits.shape}, expected {(sh, sw)}")
        up = Image.fromarray(logits.values, mode="F").resize((w, h), Image.BILINEAR)
        logits = ScalarMap(np.asarray(up))

    return InferencePass(
        logits=logits, support=BitMask(logits.values > 0.0), presence=dict(presence)
    )
