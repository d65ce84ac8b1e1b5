"""Component-wise adaptive fusion of local and global logit maps.

Starting from the merged local map, each sufficiently large connected
component of the global support gets blended toward the global map by a
piecewise-linear weight of its local coverage ratio: fully covered
components keep the local prediction, uncovered ones take the global one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .raster import BitMask, ScalarMap, connected_components, filter_by_area


@dataclass(frozen=True)
class RectificationParams:
    tau_miss: float = 0.2
    tau_keep: float = 0.8
    a_min: int = 64

    def __post_init__(self) -> None:
        if not (0.0 <= self.tau_miss < self.tau_keep <= 1.0):
            raise ConfigError(
                f"need 0 <= tau_miss < tau_keep <= 1, got ({self.tau_miss}, {self.tau_keep})"
            )
        if self.a_min < 0:
            raise ConfigError(f"a_min must be >= 0, got {self.a_min}")


def coverage_ratio(pixels: np.ndarray, local_support: BitMask) -> float:
    """Fraction of the component covered by the local support mask."""
    if len(pixels) == 0:
        raise ValueError("coverage of an empty component is undefined")
    covered = int(np.count_nonzero(local_support.bits[pixels[:, 0], pixels[:, 1]]))
    return covered / len(pixels)


def fusion_weight(rho: float, params: RectificationParams) -> float:
    """Piecewise-linear blend weight: 1 below tau_miss, 0 at or above
    tau_keep, linear in between. Continuous and non-increasing on [0, 1]."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"coverage ratio must be in [0, 1], got {rho}")
    if rho < params.tau_miss:
        return 1.0
    if rho >= params.tau_keep:
        return 0.0
    return (params.tau_keep - rho) / (params.tau_keep - params.tau_miss)


def rectify(
    local: ScalarMap,
    global_: ScalarMap,
    global_support: BitMask,
    params: RectificationParams,
) -> ScalarMap:
    """Blend global logits into the local map inside each surviving global
    support component; every other pixel keeps the local value bit-exactly."""
    if local.shape != global_.shape or local.shape != global_support.shape:
        raise DimensionMismatch(
            f"rectification inputs disagree: {local.shape}, {global_.shape}, {global_support.shape}"
        )

    out = local.values.copy()
    local_support = BitMask(local.values > 0.0)
    comps = filter_by_area(connected_components(global_support, 8), params.a_min)
    for comp in comps.components:
        weight = fusion_weight(coverage_ratio(comp.pixels, local_support), params)
        if weight == 0.0:
            continue
        rows, cols = comp.pixels[:, 0], comp.pixels[:, 1]
        if weight == 1.0:
            out[rows, cols] = global_.values[rows, cols]
        else:
            # local + w * (global - local): exact fixed point when the maps agree
            l = local.values[rows, cols].astype(np.float64)
            g = global_.values[rows, cols].astype(np.float64)
            out[rows, cols] = (l + weight * (g - l)).astype(np.float32)
    return ScalarMap(out)
