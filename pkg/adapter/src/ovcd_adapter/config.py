"""Adapter configuration and logit calibration.

Calibration is an affine map applied to every raw model score so that 0
becomes the decision boundary the engine's thresholds assume:
calibrated = scale * raw + offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdapterConfig:
    host: str = "127.0.0.1"
    port: int = 8731
    model: str = "fallback"  # "fallback" or an external checkpoint id
    max_side: int = 4096
    max_concurrency: int = 8
    feature_stride: int = 8
    calibration_offset: float = 0.0
    calibration_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.max_side < 1 or self.max_concurrency < 1 or self.feature_stride < 1:
            raise ValueError("max_side, max_concurrency and feature_stride must be >= 1")
        if self.calibration_scale <= 0:
            raise ValueError(f"calibration scale must be > 0, got {self.calibration_scale}")


def calibrate_logits(raw: np.ndarray, offset: float = 0.0, scale: float = 1.0) -> np.ndarray:
    """Affine calibration; rejects non-finite scores instead of passing them on."""
    arr = np.asarray(raw, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError("raw scores contain non-finite values")
    return scale * arr + offset
