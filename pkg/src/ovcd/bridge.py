"""Histogram-aligned transition frames bridging a bi-temporal pair.

The bridge inserts K intermediate frames between the two acquisitions so a
mask tracker sees a gradual appearance change instead of one abrupt jump:
the source image is first remapped channel-wise onto the destination's
intensity distribution, then blended linearly toward the destination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DimensionMismatch
from .raster import RasterImage

Direction = Literal["forward", "backward"]


def match_channel(source: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Remap one uint8 channel so its intensity distribution follows ``reference``.

    CDF inversion: intensity v maps to the smallest reference intensity whose
    CDF reaches CDF_src(v). Comparisons use exact integer cross-products, so
    tie handling never depends on float rounding. The two arrays may have
    different shapes; matching is statistical, not spatial.
    """
    src = np.asarray(source, dtype=np.uint8)
    ref = np.asarray(reference, dtype=np.uint8)
    if src.size == 0 or ref.size == 0:
        raise ValueError("cannot histogram-match an empty channel")

    src_cum = np.cumsum(np.bincount(src.ravel(), minlength=256)).astype(np.int64)
    ref_cum = np.cumsum(np.bincount(ref.ravel(), minlength=256)).astype(np.int64)
    src_total = src_cum[-1]
    ref_total = ref_cum[-1]

    # smallest u with CDF_ref(u) >= CDF_src(v), compared as
    # ref_cum[u] * src_total >= src_cum[v] * ref_total (exact in int64).
    lut = np.searchsorted(ref_cum * src_total, src_cum * ref_total, side="left")
    lut = np.minimum(lut, 255).astype(np.uint8)
    return lut[src]


def histogram_match(source: RasterImage, reference: RasterImage) -> RasterImage:
    """Channel-wise histogram matching of ``source`` onto ``reference``."""
    matched = np.empty_like(source.data)
    for c in range(3):
        matched[:, :, c] = match_channel(source.data[:, :, c], reference.data[:, :, c])
    return RasterImage(matched)


@dataclass
class BridgedSequence:
    """Ordered frames [source, K blended transitions, destination].

    lambdas[k-1] = k / (K+1) is the blend weight of the k-th interior frame;
    the endpoints are bit-identical to the inputs.
    """

    frames: list[RasterImage]
    lambdas: list[float] = field(default_factory=list)
    direction: Direction = "forward"

    def __post_init__(self) -> None:
        if len(self.frames) != len(self.lambdas) + 2:
            raise ValueError(
                f"expected {len(self.lambdas) + 2} frames for {len(self.lambdas)} "
                f"blend weights, got {len(self.frames)}"
            )

    @property
    def k(self) -> int:
        return len(self.lambdas)

    @property
    def source(self) -> RasterImage:
        return self.frames[0]

    @property
    def destination(self) -> RasterImage:
        return self.frames[-1]


def build_bridged_sequence(
    t_src: RasterImage,
    t_dst: RasterImage,
    k: int,
    direction: Direction = "forward",
) -> BridgedSequence:
    """Build the K-frame transition sequence from ``t_src`` to ``t_dst``.

    The source is histogram-aligned to the destination once, then each
    interior frame is ``round((1-lambda) * aligned + lambda * dst)`` with
    lambda = k/(K+1), rounded half away from zero and clamped to [0, 255].
    k = 0 yields just the endpoint pair.
    """
    if t_src.shape != t_dst.shape:
        raise DimensionMismatch(f"bridged pair dimensions differ: {t_src.shape} vs {t_dst.shape}")
    if k < 0:
        raise ValueError(f"transition frame count must be >= 0, got {k}")
    if k == 0:
        return BridgedSequence([t_src, t_dst], [], direction)

    aligned = histogram_match(t_src, t_dst).data.astype(np.float64)
    dst = t_dst.data.astype(np.float64)

    frames = [t_src]
    lambdas: list[float] = []
    for step in range(1, k + 1):
        lam = step / (k + 1)
        blend = np.floor((1.0 - lam) * aligned + lam * dst + 0.5)  # values are >= 0
        frames.append(RasterImage(np.clip(blend, 0.0, 255.0).astype(np.uint8)))
        lambdas.append(lam)
    frames.append(t_dst)
    return BridgedSequence(frames, lambdas, direction)
