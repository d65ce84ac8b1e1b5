"""Deterministic synthetic scene generator with per-category change truth.

Scenes are flat-colored shapes on a gray background, rendered twice: the
first acquisition is canonical, the second gets a global nuisance transform
(brightness offset, contrast scale, per-channel gamma) plus fresh sensor
noise. Ground truth per category is the symmetric difference of the
category's object footprints across the two timestamps. Rendering is a pure
function of (seed, object list), so whole corpora are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..raster import BitMask, RasterImage
from . import bands

_PLACEMENT_GAP = 4  # min pixel separation so instances stay 8-disjoint
_NOISE_SIGMA = 2.0  # sensor noise in 8-bit units
_BACKGROUND = (30.0, 0.03, 0.47)  # hue, sat, value of the gray backdrop
_ANCHOR_VALUE = 0.75  # mid value: stays text-detectable under any nuisance draw


@dataclass(frozen=True)
class SceneObject:
    shape: str  # "rect" | "disk"
    params: tuple[int, ...]  # rect: (x, y, w, h); disk: (cx, cy, r)
    category: str
    hue_deg: float
    saturation: float
    value: float
    at_t1: bool
    at_t2: bool


@dataclass(frozen=True)
class NuisanceParams:
    brightness_offset: float  # additive, normalized units
    contrast_scale: float
    gamma: tuple[float, float, float]  # per channel


@dataclass
class SyntheticScene:
    seed: int
    size: int
    objects: list[SceneObject]
    nuisance: NuisanceParams

    def categories(self) -> list[str]:
        seen: list[str] = []
        for obj in self.objects:
            if obj.category not in seen:
                seen.append(obj.category)
        return seen

    def footprint(self, obj: SceneObject) -> np.ndarray:
        return _footprint(obj, self.size)

    def category_footprint(self, category: str, timestamp: int) -> BitMask:
        if timestamp not in (1, 2):
            raise ValueError(f"timestamp must be 1 or 2, got {timestamp}")
        acc = np.zeros((self.size, self.size), dtype=bool)
        for obj in self.objects:
            present = obj.at_t1 if timestamp == 1 else obj.at_t2
            if obj.category == category and present:
                acc |= self.footprint(obj)
        return BitMask(acc)

    def change_truth(self, category: str) -> BitMask:
        before = self.category_footprint(category, 1).bits
        after = self.category_footprint(category, 2).bits
        return BitMask(before ^ after)

    def render(self) -> tuple[RasterImage, RasterImage]:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xC0FFEE]))
        base1 = self._paint(timestamp=1)
        base2 = self._paint(timestamp=2)
        base2 = _apply_nuisance(base2, self.nuisance)
        t1 = _finalize(base1, rng)
        t2 = _finalize(base2, rng)
        return RasterImage(t1), RasterImage(t2)

    def _paint(self, timestamp: int) -> np.ndarray:
        bg = bands.hsv_to_rgb(*_BACKGROUND)
        canvas = np.empty((self.size, self.size, 3), dtype=np.float64)
        canvas[:] = bg
        for obj in self.objects:
            present = obj.at_t1 if timestamp == 1 else obj.at_t2
            if not present:
                continue
            rgb = bands.hsv_to_rgb(obj.hue_deg, obj.saturation, obj.value)
            canvas[self.footprint(obj)] = rgb
        return canvas

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "size": self.size,
            "objects": [asdict(o) for o in self.objects],
            "nuisance": asdict(self.nuisance),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SyntheticScene":
        objects = [
            SceneObject(
                shape=o["shape"],
                params=tuple(o["params"]),
                category=o["category"],
                hue_deg=o["hue_deg"],
                saturation=o["saturation"],
                value=o["value"],
                at_t1=o["at_t1"],
                at_t2=o["at_t2"],
            )
            for o in payload["objects"]
        ]
        n = payload["nuisance"]
        nuisance = NuisanceParams(
            brightness_offset=n["brightness_offset"],
            contrast_scale=n["contrast_scale"],
            gamma=tuple(n["gamma"]),
        )
        return cls(seed=payload["seed"], size=payload["size"], objects=objects, nuisance=nuisance)


def _footprint(obj: SceneObject, size: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=bool)
    if obj.shape == "rect":
        x, y, w, h = obj.params
        mask[y : y + h, x : x + w] = True
    elif obj.shape == "disk":
        cx, cy, r = obj.params
        yy, xx = np.ogrid[:size, :size]
        mask[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = True
    else:
        raise ValueError(f"unknown shape {obj.shape!r}")
    return mask


def _apply_nuisance(canvas: np.ndarray, nuisance: NuisanceParams) -> np.ndarray:
    out = np.empty_like(canvas)
    for c in range(3):
        out[..., c] = np.power(np.clip(canvas[..., c], 0.0, 1.0), nuisance.gamma[c])
    out = out * nuisance.contrast_scale + nuisance.brightness_offset
    return np.clip(out, 0.0, 1.0)


def _finalize(canvas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    scaled = canvas * 255.0 + rng.normal(0.0, _NOISE_SIGMA, size=canvas.shape)
    return np.clip(np.rint(scaled), 0.0, 255.0).astype(np.uint8)


def _bbox_of(obj_shape: str, params: tuple[int, ...]) -> tuple[int, int, int, int]:
    if obj_shape == "rect":
        x, y, w, h = params
        return x, y, x + w - 1, y + h - 1
    cx, cy, r = params
    return cx - r, cy - r, cx + r, cy + r


def _boxes_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int], gap: int) -> bool:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return not (ax1 + gap < bx0 or bx1 + gap < ax0 or ay1 + gap < by0 or by1 + gap < ay0)


def generate_scene(
    seed: int,
    size: int = 128,
    categories_per_scene: int = 2,
    category_pool: Optional[tuple[str, ...]] = None,
) -> SyntheticScene:
    """Sample a scene layout: per category one persistent anchor object plus
    one or two extras that persist, appear or vanish."""
    if size < 48:
        raise ValueError(f"scene size must be >= 48, got {size}")
    pool = category_pool if category_pool is not None else bands.CATEGORIES
    if not 1 <= categories_per_scene <= len(pool):
        raise ValueError(f"categories_per_scene must be in 1..{len(pool)}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5CE9E]))
    chosen = rng.choice(len(pool), size=categories_per_scene, replace=False)

    objects: list[SceneObject] = []
    taken: list[tuple[int, int, int, int]] = []
    for idx in chosen:
        category = pool[int(idx)]
        presence_specs = [("both", _ANCHOR_VALUE)]
        for _ in range(int(rng.integers(1, 3))):
            pattern = str(rng.choice(("both", "appear", "vanish")))
            presence_specs.append((pattern, float(rng.uniform(0.6, 0.9))))
        for pattern, value in presence_specs:
            placed = _place_object(rng, size, taken)
            if placed is None:
                continue  # scene is crowded; skip rather than overlap
            shape, params, bbox = placed
            taken.append(bbox)
            objects.append(
                SceneObject(
                    shape=shape,
                    params=params,
                    category=category,
                    hue_deg=bands.BAND_HUE[category] + float(rng.uniform(-5.0, 5.0)),
                    saturation=0.75 + float(rng.uniform(-0.08, 0.08)),
                    value=value,
                    at_t1=pattern in ("both", "vanish"),
                    at_t2=pattern in ("both", "appear"),
                )
            )

    nuisance = NuisanceParams(
        brightness_offset=float(rng.uniform(-0.08, 0.08)),
        contrast_scale=float(rng.uniform(0.88, 1.12)),
        gamma=tuple(float(g) for g in rng.uniform(0.92, 1.10, size=3)),
    )
    return SyntheticScene(seed=seed, size=size, objects=objects, nuisance=nuisance)


def _place_object(
    rng: np.random.Generator, size: int, taken: list[tuple[int, int, int, int]]
) -> Optional[tuple[str, tuple[int, ...], tuple[int, int, int, int]]]:
    margin = _PLACEMENT_GAP
    for _ in range(200):
        shape = str(rng.choice(("rect", "disk")))
        if shape == "rect":
            w = int(rng.integers(14, 35))
            h = int(rng.integers(14, 35))
            x = int(rng.integers(margin, size - margin - w))
            y = int(rng.integers(margin, size - margin - h))
            params: tuple[int, ...] = (x, y, w, h)
        else:
            r = int(rng.integers(8, 17))
            cx = int(rng.integers(margin + r, size - margin - r))
            cy = int(rng.integers(margin + r, size - margin - r))
            params = (cx, cy, r)
        bbox = _bbox_of(shape, params)
        if not any(_boxes_overlap(bbox, other, _PLACEMENT_GAP) for other in taken):
            return shape, params, bbox
    return None


def generate_corpus(seed: int, n: int, size: int = 128) -> list[SyntheticScene]:
    """n scenes derived deterministically from one corpus seed."""
    return [generate_scene(seed * 100003 + i, size=size) for i in range(n)]
