"""In-process deterministic backend over the color-band world.

The segmenter scores pixels by hue-band membership (with strict saturation
and value gates for text prompts, looser hue-only matching for exemplar
prompts), the feature extractor pools chroma-weighted hue vectors per cell,
and the propagator tracks the majority band of the prompt mask into the
final frame. Everything is a pure function of its inputs.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..query import PromptSpec
from ..raster import BitMask, RasterImage, ScalarMap
from . import bands
from .base import BackendCapabilities, FeatureMap

_BAND_CENTERS = np.array([bands.BAND_HUE[name] for name in bands.CATEGORIES])


def _text_logits(hue: np.ndarray, sat: np.ndarray, val: np.ndarray, center: float) -> np.ndarray:
    hue_term = 1.0 - bands.hue_distance(hue, center) / bands.TEXT_HALFWIDTH
    v_lo, v_hi = bands.TEXT_VALUE_RANGE
    gate = (sat >= bands.TEXT_MIN_SAT) & (val >= v_lo) & (val <= v_hi)
    gated = bands.LOGIT_SCALE * hue_term
    ungated = bands.LOGIT_SCALE * np.minimum(hue_term, 0.0) - bands.GATE_PENALTY
    return np.where(gate, gated, ungated)


def _exemplar_logits(hue: np.ndarray, sat: np.ndarray, val: np.ndarray, center: float) -> np.ndarray:
    hue_term = 1.0 - bands.hue_distance(hue, center) / bands.EXEMPLAR_HALFWIDTH
    gate = (sat >= bands.EXEMPLAR_MIN_SAT) & (val >= bands.EXEMPLAR_MIN_VALUE)
    gated = bands.LOGIT_SCALE * hue_term
    ungated = bands.LOGIT_SCALE * np.minimum(hue_term, 0.0) - bands.GATE_PENALTY
    return np.where(gate, gated, ungated)


def _band_ids(hue: np.ndarray, sat: np.ndarray, val: np.ndarray) -> np.ndarray:
    """Nearest band id per pixel, or -1 where no band qualifies."""
    dists = np.stack([bands.hue_distance(hue, c) for c in _BAND_CENTERS])
    nearest = np.argmin(dists, axis=0)
    best = np.take_along_axis(dists, nearest[None], axis=0)[0]
    ok = (
        (best <= bands.PROP_HALFWIDTH)
        & (sat >= bands.PROP_MIN_SAT)
        & (val >= bands.PROP_MIN_VALUE)
    )
    return np.where(ok, nearest, -1)


class SyntheticBackend:
    """Implements Segmenter, FeatureExtractor and MaskPropagator."""

    def __init__(self, feature_stride: int = 8, max_side: int = 4096, max_concurrency: int = 8):
        self._stride = feature_stride
        self._caps = BackendCapabilities(
            max_side=max_side,
            max_concurrency=max_concurrency,
            feature_dim=4,
            feature_stride=feature_stride,
        )

    def capabilities(self) -> BackendCapabilities:
        return self._caps

    # -- Segmenter ----------------------------------------------------------

    def segment(self, image: RasterImage, prompt: PromptSpec) -> tuple[ScalarMap, dict[str, float]]:
        hue, sat, val = bands.rgb_to_hsv(image.data)

        maps: list[np.ndarray] = []
        presence: dict[str, float] = {}
        for text in prompt.text_prompts:
            category = bands.PROMPT_TO_CATEGORY.get(text)
            if category is None:
                logits = np.full(hue.shape, bands.UNKNOWN_PROMPT_LOGIT)
                presence[text] = 0.0
            else:
                logits = _text_logits(hue, sat, val, bands.BAND_HUE[category])
                presence[text] = 1.0 if bool((logits > 0.0).any()) else 0.0
            maps.append(logits)

        best = 0
        for i, text in enumerate(prompt.text_prompts):
            if presence[text] > presence[prompt.text_prompts[best]]:
                best = i
        out = maps[best]

        if prompt.exemplar is not None:
            vec = prompt.exemplar.vector
            chroma = math.hypot(float(vec[0]), float(vec[1]))
            if chroma >= 1e-9:
                center = math.degrees(math.atan2(float(vec[1]), float(vec[0]))) % 360.0
                out = np.maximum(out, _exemplar_logits(hue, sat, val, center))

        return ScalarMap(out.astype(np.float32)), presence

    # -- FeatureExtractor ---------------------------------------------------

    def extract_features(self, image: RasterImage) -> FeatureMap:
        hue, sat, val = bands.rgb_to_hsv(image.data)
        rad = np.deg2rad(hue)
        feats = np.stack([sat * np.cos(rad), sat * np.sin(rad), sat, val], axis=-1)

        stride = self._stride
        h, w = hue.shape
        gw = -(-w // stride)
        gh = -(-h // stride)
        rows, cols = np.indices((h, w))
        cell = (rows // stride) * gw + (cols // stride)
        sums = np.zeros((gh * gw, 4), dtype=np.float64)
        np.add.at(sums, cell.ravel(), feats.reshape(-1, 4))
        counts = np.bincount(cell.ravel(), minlength=gh * gw).astype(np.float64)
        values = sums / counts[:, None]
        return FeatureMap(values.reshape(gh, gw, 4), stride=stride)

    # -- MaskPropagator -----------------------------------------------------

    def propagate(
        self, init_mask: BitMask, frames: Sequence[RasterImage]
    ) -> tuple[BitMask, ScalarMap]:
        if len(frames) < 2:
            raise ValueError(f"propagation needs at least 2 frames, got {len(frames)}")
        last = frames[-1]
        if init_mask.shape != frames[0].shape:
            raise ValueError(
                f"init mask {init_mask.shape} does not match first frame {frames[0].shape}"
            )
        empty = BitMask.zeros(last.width, last.height)
        flat_conf = ScalarMap.zeros(last.width, last.height)
        if init_mask.area() == 0:
            return empty, flat_conf

        hue0, sat0, val0 = bands.rgb_to_hsv(frames[0].data)
        ids0 = _band_ids(hue0, sat0, val0)
        under = ids0[init_mask.bits]
        under = under[under >= 0]
        if under.size == 0:
            return empty, flat_conf
        counts = np.bincount(under, minlength=len(bands.CATEGORIES))
        majority = int(np.argmax(counts))  # argmax ties resolve to the lowest id

        hue, sat, val = bands.rgb_to_hsv(last.data)
        ids = _band_ids(hue, sat, val)
        mask = ids == majority

        dist = bands.hue_distance(hue, _BAND_CENTERS[majority])
        score = np.clip(1.0 - dist / bands.PROP_HALFWIDTH, 0.0, 1.0)
        gate = (sat >= bands.PROP_MIN_SAT) & (val >= bands.PROP_MIN_VALUE)
        confidence = np.where(gate, score, 0.0)
        return BitMask(mask), ScalarMap(confidence.astype(np.float32))
