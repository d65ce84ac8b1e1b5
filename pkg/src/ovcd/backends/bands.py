"""Color-band vocabulary of the deterministic synthetic world.

Categories are encoded as disjoint hue bands (at least 45 degrees apart), so
a pixel's category can be recovered from its hue alone. The scene renderer
paints objects inside these bands and the synthetic backend classifies by
band membership. Any wire adapter offering the classical fallback mirrors
these exact constants and formulas; the cross-implementation equivalence
suite compares support masks bit for bit.
"""

from __future__ import annotations

import numpy as np

# (category, hue center in degrees, prompt synonyms)
BAND_TABLE: tuple[tuple[str, float, tuple[str, ...]], ...] = (
    ("building", 15.0, ("building", "house", "rooftop")),
    ("cropland", 60.0, ("cropland", "field")),
    ("vegetation", 120.0, ("vegetation", "forest", "tree")),
    ("water", 220.0, ("water", "lake")),
    ("road", 285.0, ("road", "pavement")),
)

CATEGORIES: tuple[str, ...] = tuple(name for name, _, _ in BAND_TABLE)
BAND_HUE: dict[str, float] = {name: hue for name, hue, _ in BAND_TABLE}
SYNONYMS: dict[str, tuple[str, ...]] = {name: prompts for name, _, prompts in BAND_TABLE}
PROMPT_TO_CATEGORY: dict[str, str] = {
    prompt: name for name, _, prompts in BAND_TABLE for prompt in prompts
}

# Classifier geometry (degrees) and gates. The text classifier is strict
# about saturation and value (the "textbook appearance" of a category), the
# exemplar and tracker matchers are hue-driven and tolerate value shifts.
TEXT_HALFWIDTH = 15.0
TEXT_MIN_SAT = 0.35
TEXT_VALUE_RANGE = (0.5, 0.97)
EXEMPLAR_HALFWIDTH = 16.0
EXEMPLAR_MIN_SAT = 0.3
EXEMPLAR_MIN_VALUE = 0.2
PROP_HALFWIDTH = 20.0
PROP_MIN_SAT = 0.3
PROP_MIN_VALUE = 0.2
LOGIT_SCALE = 2.0
GATE_PENALTY = 3.0
UNKNOWN_PROMPT_LOGIT = -6.0


def rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB (uint8, HxWx3) -> (hue degrees [0,360), sat [0,1], value [0,1])."""
    arr = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    chroma = maxc - minc
    value = maxc
    sat = np.where(maxc > 0.0, chroma / np.where(maxc > 0.0, maxc, 1.0), 0.0)

    safe = np.where(chroma > 0.0, chroma, 1.0)
    hue = np.zeros_like(maxc)
    is_r = (maxc == r) & (chroma > 0.0)
    is_g = (maxc == g) & (chroma > 0.0) & ~is_r
    is_b = (chroma > 0.0) & ~is_r & ~is_g
    hue = np.where(is_r, ((g - b) / safe) % 6.0, hue)
    hue = np.where(is_g, (b - r) / safe + 2.0, hue)
    hue = np.where(is_b, (r - g) / safe + 4.0, hue)
    return hue * 60.0, sat, value


def hsv_to_rgb(hue_deg: float, sat: float, value: float) -> tuple[float, float, float]:
    """Scalar HSV -> RGB in [0, 1]."""
    h = (hue_deg % 360.0) / 60.0
    c = value * sat
    x = c * (1.0 - abs(h % 2.0 - 1.0))
    m = value - c
    sector = int(h) % 6
    r, g, b = [(c, x, 0.0), (x, c, 0.0), (0.0, c, x), (0.0, x, c), (x, 0.0, c), (c, 0.0, x)][sector]
    return r + m, g + m, b + m


def hue_distance(hue_deg: np.ndarray, center_deg: float) -> np.ndarray:
    """Circular hue distance in degrees, in [0, 180]."""
    d = np.abs(np.asarray(hue_deg, dtype=np.float64) - center_deg) % 360.0
    return np.minimum(d, 360.0 - d)
