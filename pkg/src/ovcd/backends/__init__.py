"""Backend interfaces, the deterministic synthetic backend and the wire client."""

from .base import (
    BackendBundle,
    BackendCapabilities,
    FeatureExtractor,
    FeatureMap,
    MaskPropagator,
    Segmenter,
)
from .scene import NuisanceParams, SceneObject, SyntheticScene, generate_corpus, generate_scene
from .synthetic import SyntheticBackend
from .wire import RemoteBackend, WIRE_SCHEMA

__all__ = [
    "BackendBundle",
    "BackendCapabilities",
    "FeatureExtractor",
    "FeatureMap",
    "MaskPropagator",
    "NuisanceParams",
    "RemoteBackend",
    "SceneObject",
    "Segmenter",
    "SyntheticBackend",
    "SyntheticScene",
    "WIRE_SCHEMA",
    "generate_corpus",
    "generate_scene",
]
