"""Core raster types and pixel-set algorithms shared by every pipeline stage.

Masks and logit maps are thin dataclasses around numpy arrays in row-major
(height, width) layout. All operations are pure functions over their inputs
and therefore safe to call from parallel tile workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DimensionMismatch

Connectivity = Literal[4, 8]

FLOAT_GRID_MAGIC = b"OVCD"
_FLOAT_GRID_HEADER = struct.Struct("<4sIII")

_STRUCTURE_8 = np.ones((3, 3), dtype=bool)
_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass
class RasterImage:
    """H x W x 3 8-bit image, one of the bi-temporal inputs."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected an HxWx3 image, got shape {np.shape(self.data)}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be at least 1x1")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    def crop(self, x: int, y: int, w: int, h: int) -> "RasterImage":
        return RasterImage(self.data[y : y + h, x : x + w].copy())


@dataclass
class BitMask:
    """Binary raster mask (True = foreground)."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"expected an HxW mask, got shape {arr.shape}")
        self.bits = arr.astype(bool, copy=False)

    @classmethod
    def zeros(cls, width: int, height: int) -> "BitMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def area(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass
class ScalarMap:
    """Real-valued raster (logits, confidences); every value must be finite."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"expected an HxW map, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("scalar map contains non-finite values")
        self.values = arr

    @classmethod
    def zeros(cls, width: int, height: int) -> "ScalarMap":
        return cls(np.zeros((height, width), dtype=np.float32))

    @classmethod
    def full(cls, width: int, height: int, value: float) -> "ScalarMap":
        return cls(np.full((height, width), value, dtype=np.float32))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class Component:
    """One connected foreground region.

    bbox is (x, y, w, h); pixels is an (n, 2) int32 array of (row, col)
    coordinates in raster-scan order.
    """

    id: int
    area: int
    bbox: tuple[int, int, int, int]
    pixels: np.ndarray


@dataclass
class LabeledComponents:
    """Per-pixel component ids (0 = background) plus the component list.

    Ids are contiguous 1..R, assigned in raster-scan order of each
    component's first foreground pixel, so labeling is reproducible.
    """

    label_map: np.ndarray
    components: list[Component]

    def component_mask(self, component_id: int) -> BitMask:
        return BitMask(self.label_map == component_id)

    def foreground(self) -> BitMask:
        return BitMask(self.label_map > 0)


def connected_components(mask: BitMask, connectivity: Connectivity = 8) -> LabeledComponents:
    """Label maximal connected foreground regions of ``mask``.

    Deterministic: ids follow the raster-scan order of each component's
    first pixel. Handles 4096x4096 masks without recursion.
    """
    if connectivity == 8:
        structure = _STRUCTURE_8
    elif connectivity == 4:
        structure = _STRUCTURE_4
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")

    raw, count = ndimage.label(mask.bits, structure=structure)
    if count == 0:
        return LabeledComponents(np.zeros(mask.bits.shape, dtype=np.int32), [])

    flat = raw.ravel()
    fg = np.flatnonzero(flat)
    raw_labels = flat[fg]

    # Re-rank labels by first appearance in raster order.
    uniq, first_pos = np.unique(raw_labels, return_index=True)
    rank = np.argsort(first_pos, kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[uniq[rank]] = np.arange(1, count + 1, dtype=np.int32)

    label_map = remap[raw].astype(np.int32)
    labels = remap[raw_labels]

    rows, cols = np.unravel_index(fg, mask.bits.shape)
    order = np.argsort(labels, kind="stable")  # stable keeps raster order inside groups
    sorted_labels = labels[order]
    starts = np.searchsorted(sorted_labels, np.arange(1, count + 1), side="left")
    ends = np.searchsorted(sorted_labels, np.arange(1, count + 1), side="right")

    components: list[Component] = []
    for cid in range(1, count + 1):
        sel = order[starts[cid - 1] : ends[cid - 1]]
        r = rows[sel]
        c = cols[sel]
        x0, x1 = int(c.min()), int(c.max())
        y0, y1 = int(r.min()), int(r.max())
        pixels = np.stack([r, c], axis=1).astype(np.int32)
        components.append(
            Component(id=cid, area=len(sel), bbox=(x0, y0, x1 - x0 + 1, y1 - y0 + 1), pixels=pixels)
        )
    return LabeledComponents(label_map, components)


def filter_by_area(comps: LabeledComponents, a_min: int) -> LabeledComponents:
    """Drop components smaller than ``a_min`` pixels, relabeling contiguously."""
    if a_min < 0:
        raise ValueError(f"a_min must be >= 0, got {a_min}")
    kept = [c for c in comps.components if c.area >= a_min]
    label_map = np.zeros_like(comps.label_map)
    out: list[Component] = []
    for new_id, comp in enumerate(kept, start=1):
        label_map[comp.pixels[:, 0], comp.pixels[:, 1]] = new_id
        out.append(Component(id=new_id, area=comp.area, bbox=comp.bbox, pixels=comp.pixels))
    return LabeledComponents(label_map, out)


def _check_same_shape(a: BitMask, b: BitMask) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask dimensions differ: {a.shape} vs {b.shape}")


def intersect(a: BitMask, b: BitMask) -> BitMask:
    _check_same_shape(a, b)
    return BitMask(a.bits & b.bits)


def union(a: BitMask, b: BitMask) -> BitMask:
    _check_same_shape(a, b)
    return BitMask(a.bits | b.bits)


def mask_area(a: BitMask) -> int:
    return a.area()


def mask_iou(a: BitMask, b: BitMask) -> float:
    """Intersection over union; two empty masks count as perfect agreement."""
    _check_same_shape(a, b)
    inter = int(np.count_nonzero(a.bits & b.bits))
    uni = int(np.count_nonzero(a.bits | b.bits))
    if uni == 0:
        return 1.0
    return inter / uni


# ---------------------------------------------------------------------------
# Serialization: masks as 8-bit single-channel PNG, logit maps as raw
# little-endian float32 grids behind a 16-byte header.
# ---------------------------------------------------------------------------


def save_image_png(image: RasterImage, path: str | Path) -> None:
    Image.fromarray(image.data, mode="RGB").save(path, format="PNG")


def load_image_png(path: str | Path) -> RasterImage:
    with Image.open(path) as img:
        return RasterImage(np.asarray(img.convert("RGB")))


def save_mask_png(mask: BitMask, path: str | Path) -> None:
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_mask_png(path: str | Path) -> BitMask:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return BitMask(arr > 127)


def save_float_grid(m: ScalarMap, path: str | Path) -> None:
    with open(path, "wb") as fp:
        fp.write(_FLOAT_GRID_HEADER.pack(FLOAT_GRID_MAGIC, m.width, m.height, 0))
        fp.write(np.ascontiguousarray(m.values, dtype="<f4").tobytes())


def load_float_grid(path: str | Path) -> ScalarMap:
    blob = Path(path).read_bytes()
    if len(blob) < _FLOAT_GRID_HEADER.size:
        raise ValueError(f"{path}: truncated float grid header")
    magic, width, height, _reserved = _FLOAT_GRID_HEADER.unpack_from(blob)
    if magic != FLOAT_GRID_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _FLOAT_GRID_HEADER.size + 4 * width * height
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(blob)}")
    values = np.frombuffer(blob, dtype="<f4", offset=_FLOAT_GRID_HEADER.size)
    return ScalarMap(values.reshape(height, width).copy())
