"""Foundation-model-facing interfaces and response validation.

Three capabilities are required of any backend: promptable segmentation,
dense feature extraction and mask propagation over an ordered frame
sequence. Logits are calibrated so 0 is the decision boundary; every
response is validated before it enters the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from ..errors import ContractViolation
from ..query import PromptSpec
from ..raster import BitMask, RasterImage, ScalarMap


@dataclass(frozen=True)
class BackendCapabilities:
    max_side: int
    max_concurrency: int
    feature_dim: int
    feature_stride: int


@dataclass
class FeatureMap:
    """Dense per-cell feature grid; values has shape (grid_h, grid_w, dim)."""

    values: np.ndarray
    stride: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected (grid_h, grid_w, dim) features, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("feature map contains non-finite values")
        if self.stride < 1:
            raise ValueError(f"feature stride must be >= 1, got {self.stride}")
        self.values = arr

    @property
    def grid_height(self) -> int:
        return self.values.shape[0]

    @property
    def grid_width(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def covers(self, width: int, height: int) -> bool:
        return self.grid_width * self.stride >= width and self.grid_height * self.stride >= height


@runtime_checkable
class Segmenter(Protocol):
    def capabilities(self) -> BackendCapabilities: ...

    def segment(
        self, image: RasterImage, prompt: PromptSpec
    ) -> tuple[ScalarMap, dict[str, float]]:
        """Return (logit map, per-prompt presence scores) for ``image``.

        Contract: the map belongs to the best-presence prompt of the call
        (ties resolved to the first listed prompt); 0 is the calibrated
        decision boundary; presence scores lie in [0, 1].
        """
        ...


@runtime_checkable
class FeatureExtractor(Protocol):
    def capabilities(self) -> BackendCapabilities: ...

    def extract_features(self, image: RasterImage) -> FeatureMap: ...


@runtime_checkable
class MaskPropagator(Protocol):
    def capabilities(self) -> BackendCapabilities: ...

    def propagate(
        self, init_mask: BitMask, frames: Sequence[RasterImage]
    ) -> tuple[BitMask, ScalarMap]:
        """Track ``init_mask`` from frames[0] to frames[-1].

        Returns the final-frame mask plus a confidence map in [0, 1].
        """
        ...


@dataclass
class BackendBundle:
    """The three interfaces an engine run needs, possibly one object."""

    segmenter: Segmenter
    features: FeatureExtractor
    propagator: MaskPropagator

    @classmethod
    def single(cls, backend) -> "BackendBundle":
        return cls(segmenter=backend, features=backend, propagator=backend)


# ---------------------------------------------------------------------------
# Response validation: invariant violations never propagate silently.
# ---------------------------------------------------------------------------


def validate_logits(values: np.ndarray, width: int, height: int, origin: str) -> ScalarMap:
    arr = np.asarray(values, dtype=np.float32)
    if arr.shape != (height, width):
        raise ContractViolation(
            f"{origin}: logit grid shape {arr.shape} does not match image {height}x{width}"
        )
    if not np.isfinite(arr).all():
        raise ContractViolation(f"{origin}: logit grid contains non-finite values")
    return ScalarMap(arr)


def validate_presence(presence: Mapping[str, float], prompts: Sequence[str], origin: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for prompt in prompts:
        if prompt not in presence:
            raise ContractViolation(f"{origin}: presence score missing for prompt {prompt!r}")
        score = float(presence[prompt])
        if not np.isfinite(score) or score < 0.0 or score > 1.0:
            raise ContractViolation(f"{origin}: presence score {score} for {prompt!r} outside [0, 1]")
        out[prompt] = score
    return out


def validate_confidence(values: np.ndarray, width: int, height: int, origin: str) -> ScalarMap:
    m = validate_logits(values, width, height, origin)
    if m.values.min() < 0.0 or m.values.max() > 1.0:
        raise ContractViolation(f"{origin}: confidence values outside [0, 1]")
    return m


def validate_mask(bits: np.ndarray, width: int, height: int, origin: str) -> BitMask:
    arr = np.asarray(bits)
    if arr.shape != (height, width):
        raise ContractViolation(
            f"{origin}: mask shape {arr.shape} does not match image {height}x{width}"
        )
    return BitMask(arr.astype(bool))
