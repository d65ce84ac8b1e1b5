"""Five-stage inference pipeline composing every engine stage.

Per query: (1) coarse masks from a text-prompted global pass, (2) cross
temporal reasoning over the bridged sequence in both directions, yielding
direction-specific exemplar prompts, (3) tiled local plus optional fresh
global inference with those prompts, (4) component-wise rectification,
(5) thresholding, instance decoupling and cross-time matching.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

from .backends.base import BackendBundle
from .bridge import build_bridged_sequence
from .decoding import ChangeResult, decode_change, decode_semantic
from .errors import BackendError, ConfigError, DimensionMismatch
from .memory import (
    aggregate_exemplar,
    build_prompt,
    extract_stable_regions,
    pool_region_feature,
    propagate,
)
from .query import QuerySpec
from .raster import RasterImage
from .rectify import RectificationParams, rectify
from .tiling import InferencePass, QueryLogits, plan_tiles, run_global, run_local


@dataclass
class PipelineConfig:
    """Every knob the pipeline exposes, JSON-serializable."""

    k_transition: int = 3  # shipped default transition-frame count
    c_min: float = 0.5
    replication: int = 4
    tau: float = 0.0
    tau_miss: float = 0.2
    tau_keep: float = 0.8
    a_min: int = 64
    theta_match: float = 0.5
    tile_size: int = 256
    tile_stride: int = 128
    merge_rule: str = "mean"
    global_downscale: float = 1.0
    enable_ctmr: bool = True
    enable_forward: bool = True
    enable_backward: bool = True
    weighted_exemplar: bool = True
    enable_rectification: bool = True
    enable_global_refinement: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_transition < 0:
            raise ConfigError(f"k_transition must be >= 0, got {self.k_transition}")
        if not 0.0 <= self.c_min <= 1.0:
            raise ConfigError(f"c_min must be in [0, 1], got {self.c_min}")
        if self.replication < 0:
            raise ConfigError(f"replication must be >= 0, got {self.replication}")
        if not 0.0 < self.theta_match <= 1.0:
            raise ConfigError(f"theta_match must be in (0, 1], got {self.theta_match}")
        if self.merge_rule not in ("mean", "max"):
            raise ConfigError(f"merge_rule must be 'mean' or 'max', got {self.merge_rule!r}")
        if not 0.0 < self.global_downscale <= 1.0:
            raise ConfigError(f"global_downscale must be in (0, 1], got {self.global_downscale}")
        if self.tile_size < 1 or not 1 <= self.tile_stride <= self.tile_size:
            raise ConfigError(
                f"invalid tiling: tile_size={self.tile_size}, tile_stride={self.tile_stride}"
            )
        self.rectification_params()  # validates the threshold ordering

    def rectification_params(self) -> RectificationParams:
        return RectificationParams(tau_miss=self.tau_miss, tau_keep=self.tau_keep, a_min=self.a_min)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fp:
            return cls.from_dict(json.load(fp))

    def with_overrides(self, **overrides) -> "PipelineConfig":
        return replace(self, **overrides)


@dataclass
class PipelineOutputs:
    """Per-query results plus isolated failures (query id -> message)."""

    results: dict[str, ChangeResult] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)


def run_pipeline(
    t1: RasterImage,
    t2: RasterImage,
    queries: Sequence[QuerySpec],
    config: PipelineConfig,
    backends: BackendBundle,
) -> PipelineOutputs:
    """Run the full pipeline for every query over one co-registered pair.

    Queries are independent; a backend failure aborts only its own query.
    """
    if t1.shape != t2.shape:
        raise DimensionMismatch(f"pair dimensions differ: {t1.shape} vs {t2.shape}")
    if not queries:
        raise ValueError("at least one query is required")
    ids = [q.query_id for q in queries]
    if len(set(ids)) != len(ids):
        raise ValueError(f"query ids must be unique, got {ids}")

    outputs = PipelineOutputs()
    for query in queries:
        try:
            outputs.results[query.query_id] = _run_query(t1, t2, query, config, backends)
        except BackendError as exc:
            outputs.failures[query.query_id] = str(exc)
    return outputs


def _run_query(
    t1: RasterImage,
    t2: RasterImage,
    query: QuerySpec,
    cfg: PipelineConfig,
    backends: BackendBundle,
) -> ChangeResult:
    text_prompt = build_prompt(query, None, 0)
    images = {1: t1, 2: t2}

    # Stage 1: coarse masks from a text-only global pass. Needed whenever the
    # tracker must be prompted, or rectification will reuse these logits
    # because no fresh global pass is configured.
    need_init = cfg.enable_ctmr or (cfg.enable_rectification and not cfg.enable_global_refinement)
    init_pass: dict[int, InferencePass] = {}
    if need_init:
        for t in (1, 2):
            init_pass[t] = run_global(images[t], text_prompt, backends.segmenter, cfg.global_downscale)

    # Stage 2: bidirectional memory reasoning toward exemplar prompts.
    prompts = {1: text_prompt, 2: text_prompt}
    if cfg.enable_ctmr:
        coarse = {t: decode_semantic(init_pass[t].logits, cfg.tau) for t in (1, 2)}
        directions = []
        if cfg.enable_forward:
            directions.append((1, 2, "forward"))
        if cfg.enable_backward:
            directions.append((2, 1, "backward"))
        for src, dst, direction in directions:
            if coarse[src].area() == 0:
                continue  # nothing to prompt the tracker with
            sequence = build_bridged_sequence(images[src], images[dst], cfg.k_transition, direction)
            prop = propagate(coarse[src], sequence, backends.propagator)
            stable = extract_stable_regions(prop, coarse[dst], cfg.c_min)
            if not stable:
                continue
            try:
                feature_map = backends.features.extract_features(images[dst])
            except BackendError:
                raise
            except Exception as exc:
                raise BackendError(f"feature extraction failed: {exc}") from exc
            vectors = [pool_region_feature(region, feature_map) for region in stable]
            exemplar = aggregate_exemplar(stable, vectors, weighted=cfg.weighted_exemplar)
            if exemplar is not None:
                prompts[dst] = build_prompt(query, exemplar, cfg.replication)

    # Stages 3-4: local (tiled) + global logits, then rectification.
    logits = {}
    presence = {}
    for t in (1, 2):
        image = images[t]
        plan = plan_tiles(image.width, image.height, cfg.tile_size, cfg.tile_stride)
        local = run_local(image, prompts[t], plan, backends.segmenter, cfg.merge_rule)
        if cfg.enable_global_refinement:
            global_pass = run_global(image, prompts[t], backends.segmenter, cfg.global_downscale)
        else:
            global_pass = init_pass.get(t)
        state = QueryLogits.from_passes(local, global_pass)
        presence[t] = state.presence

        if cfg.enable_rectification and state.global_ is not None:
            logits[t] = rectify(
                state.local, state.global_, state.support_global, cfg.rectification_params()
            )
        else:
            logits[t] = state.local

    # Stage 5: decode.
    return decode_change(
        query, logits[1], logits[2], presence[1], presence[2], cfg.tau, cfg.theta_match
    )
