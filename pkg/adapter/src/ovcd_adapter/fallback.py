"""GPU-free classical model: color-band segmenter, HSV feature grid and
majority-band tracker. Deterministic, parameter-free, weightless."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from . import bands

_BAND_CENTERS = np.array([bands.BAND_HUE[name] for name in bands.CATEGORIES])

FEATURE_DIM = 4


def _text_logits(hue, sat, val, center):
    hue_term = 1.0 - bands.hue_distance(hue, center) / bands.TEXT_HALFWIDTH
    v_lo, v_hi = bands.TEXT_VALUE_RANGE
    gate = (sat >= bands.TEXT_MIN_SAT) & (val >= v_lo) & (val <= v_hi)
    gated = bands.LOGIT_SCALE * hue_term
    ungated = bands.LOGIT_SCALE * np.minimum(hue_term, 0.0) - bands.GATE_PENALTY
    return np.where(gate, gated, ungated)


def _exemplar_logits(hue, sat, val, center):
    hue_term = 1.0 - bands.hue_distance(hue, center) / bands.EXEMPLAR_HALFWIDTH
    gate = (sat >= bands.EXEMPLAR_MIN_SAT) & (val >= bands.EXEMPLAR_MIN_VALUE)
    gated = bands.LOGIT_SCALE * hue_term
    ungated = bands.LOGIT_SCALE * np.minimum(hue_term, 0.0) - bands.GATE_PENALTY
    return np.where(gate, gated, ungated)


def _band_ids(hue, sat, val):
    dists = np.stack([bands.hue_distance(hue, c) for c in _BAND_CENTERS])
    nearest = np.argmin(dists, axis=0)
    best = np.take_along_axis(dists, nearest[None], axis=0)[0]
    ok = (
        (best <= bands.PROP_HALFWIDTH)
        & (sat >= bands.PROP_MIN_SAT)
        & (val >= bands.PROP_MIN_VALUE)
    )
    return np.where(ok, nearest, -1)


def segment(
    image: np.ndarray, prompts: Sequence[str], exemplar: Optional[np.ndarray]
) -> tuple[np.ndarray, dict[str, float]]:
    """Logit map of the best-presence prompt (ties to the first listed) plus
    presence per prompt; the exemplar widens the map along its chroma hue."""
    hue, sat, val = bands.rgb_to_hsv(image)

    maps = []
    presence: dict[str, float] = {}
    for text in prompts:
        category = bands.PROMPT_TO_CATEGORY.get(text)
        if category is None:
            logits = np.full(hue.shape, bands.UNKNOWN_PROMPT_LOGIT)
            presence[text] = 0.0
        else:
            logits = _text_logits(hue, sat, val, bands.BAND_HUE[category])
            presence[text] = 1.0 if bool((logits > 0.0).any()) else 0.0
        maps.append(logits)

    best = 0
    for i, text in enumerate(prompts):
        if presence[text] > presence[prompts[best]]:
            best = i
    out = maps[best]

    if exemplar is not None:
        chroma = math.hypot(float(exemplar[0]), float(exemplar[1]))
        if chroma >= 1e-9:
            center = math.degrees(math.atan2(float(exemplar[1]), float(exemplar[0]))) % 360.0
            out = np.maximum(out, _exemplar_logits(hue, sat, val, center))

    return out, presence


def extract_features(image: np.ndarray, stride: int) -> tuple[np.ndarray, int, int]:
    """Per-cell means of (sat*cos hue, sat*sin hue, sat, value); returns
    (values row-major (gh*gw, dim), grid_w, grid_h)."""
    hue, sat, val = bands.rgb_to_hsv(image)
    rad = np.deg2rad(hue)
    feats = np.stack([sat * np.cos(rad), sat * np.sin(rad), sat, val], axis=-1)

    h, w = hue.shape
    gw = -(-w // stride)
    gh = -(-h // stride)
    rows, cols = np.indices((h, w))
    cell = (rows // stride) * gw + (cols // stride)
    sums = np.zeros((gh * gw, FEATURE_DIM), dtype=np.float64)
    np.add.at(sums, cell.ravel(), feats.reshape(-1, FEATURE_DIM))
    counts = np.bincount(cell.ravel(), minlength=gh * gw).astype(np.float64)
    return sums / counts[:, None], gw, gh


def propagate(
    init_mask: np.ndarray, frames: Sequence[np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Track the majority band under the prompt mask into the last frame."""
    last = frames[-1]
    shape = last.shape[:2]
    empty = np.zeros(shape, dtype=bool)
    flat = np.zeros(shape, dtype=np.float64)
    if not init_mask.any():
        return empty, flat

    hue0, sat0, val0 = bands.rgb_to_hsv(frames[0])
    ids0 = _band_ids(hue0, sat0, val0)
    under = ids0[init_mask]
    under = under[under >= 0]
    if under.size == 0:
        return empty, flat
    counts = np.bincount(under, minlength=len(bands.CATEGORIES))
    majority = int(np.argmax(counts))

    hue, sat, val = bands.rgb_to_hsv(last)
    ids = _band_ids(hue, sat, val)
    mask = ids == majority

    dist = bands.hue_distance(hue, _BAND_CENTERS[majority])
    score = np.clip(1.0 - dist / bands.PROP_HALFWIDTH, 0.0, 1.0)
    gate = (sat >= bands.PROP_MIN_SAT) & (val >= bands.PROP_MIN_VALUE)
    confidence = np.where(gate, score, 0.0)
    return mask, confidence
