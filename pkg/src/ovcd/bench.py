"""Ablation and sensitivity sweeps over a corpus of evaluated pairs.

Each sweep row runs the full pipeline under one configuration and reports
mean (over pair x category) and pooled metrics, plus deltas against either a
named baseline row or the previous row in grid order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np

from .backends.base import BackendBundle
from .backends.bands import SYNONYMS
from .backends.scene import SyntheticScene
from .dataset import DatasetPair, load_mask, load_pair_images
from .errors import ConfigError
from .metrics import ConfusionCounts, aggregate, compute_metrics, pct
from .pipeline import PipelineConfig, run_pipeline
from .query import QuerySpec
from .raster import BitMask, RasterImage

DeltaMode = Literal["baseline", "previous"]


@dataclass
class EvalItem:
    """One evaluated pair: the images plus per-category change truth."""

    name: str
    t1: RasterImage
    t2: RasterImage
    truths: dict[str, BitMask]


def scene_eval_items(scenes: Sequence[SyntheticScene]) -> list[EvalItem]:
    items = []
    for index, scene in enumerate(scenes):
        t1, t2 = scene.render()
        truths = {cat: scene.change_truth(cat) for cat in scene.categories()}
        items.append(EvalItem(name=f"pair_{index:03d}", t1=t1, t2=t2, truths=truths))
    return items


def dataset_eval_items(pairs: Sequence[DatasetPair]) -> list[EvalItem]:
    items = []
    for pair in pairs:
        t1, t2 = load_pair_images(pair)
        truths = {cat: load_mask(path) for cat, path in pair.labels.items()}
        items.append(EvalItem(name=pair.name, t1=t1, t2=t2, truths=truths))
    return items


def queries_for(categories: Sequence[str]) -> list[QuerySpec]:
    return [
        QuerySpec(query_id=cat, prompts=list(SYNONYMS.get(cat, (cat,))), category=cat)
        for cat in categories
    ]


@dataclass
class SweepRow:
    name: str
    overrides: dict
    mean_iou: float
    mean_f1: float
    micro_iou: float
    micro_f1: float
    per_pair_iou: list[float] = field(default_factory=list)
    delta_iou: Optional[float] = None
    delta_f1: Optional[float] = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    delta_mode: DeltaMode
    baseline: Optional[str]


def evaluate_config(
    config: PipelineConfig, items: Sequence[EvalItem], backends: BackendBundle
) -> tuple[float, float, float, float, list[float]]:
    """Run the pipeline over every item; returns (mean_iou, mean_f1,
    micro_iou, micro_f1, per-pair-category ious)."""
    counts: list[ConfusionCounts] = []
    ious: list[float] = []
    f1s: list[float] = []
    for item in items:
        outputs = run_pipeline(item.t1, item.t2, queries_for(list(item.truths)), config, backends)
        for category, truth in item.truths.items():
            result = outputs.results.get(category)
            pred = result.change_mask if result is not None else BitMask.zeros(truth.width, truth.height)
            c, m = compute_metrics(pred, truth)
            counts.append(c)
            ious.append(m.iou)
            f1s.append(m.f1)
    micro = aggregate(counts, "micro")
    return float(np.mean(ious)), float(np.mean(f1s)), micro.iou, micro.f1, ious


def ablation_grid() -> list[tuple[str, dict]]:
    """Feature-accretion rows: plain baseline, then memory reasoning, then
    rectification, then the extra global pass."""
    return [
        ("baseline", {"enable_ctmr": False, "enable_rectification": False, "enable_global_refinement": False}),
        ("+ctmr", {"enable_ctmr": True, "enable_rectification": False, "enable_global_refinement": False}),
        ("+rectification", {"enable_ctmr": True, "enable_rectification": True, "enable_global_refinement": False}),
        ("full", {"enable_ctmr": True, "enable_rectification": True, "enable_global_refinement": True}),
    ]


def transition_count_grid(ks: Sequence[int] = (0, 1, 3, 5)) -> list[tuple[str, dict]]:
    """Transition-frame sensitivity rows, memory reasoning only."""
    return [
        (
            f"k={k}",
            {
                "k_transition": int(k),
                "enable_ctmr": True,
                "enable_rectification": False,
                "enable_global_refinement": False,
            },
        )
        for k in ks
    ]


def run_sweep(
    grid: Sequence[tuple[str, dict]],
    items: Sequence[EvalItem],
    base_config: PipelineConfig,
    backends: BackendBundle,
    delta_mode: DeltaMode = "baseline",
    baseline: Optional[str] = None,
) -> SweepResult:
    if not grid:
        raise ConfigError("sweep grid is empty")
    if delta_mode not in ("baseline", "previous"):
        raise ConfigError(f"unknown delta mode {delta_mode!r}")
    names = [name for name, _ in grid]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate sweep row names: {names}")
    if delta_mode == "baseline":
        baseline = baseline if baseline is not None else names[0]
        if baseline not in names:
            raise ConfigError(f"baseline row {baseline!r} not in grid {names}")

    rows: list[SweepRow] = []
    for name, overrides in grid:
        config = base_config.with_overrides(**overrides)
        mean_iou, mean_f1, micro_iou, micro_f1, per_pair = evaluate_config(config, items, backends)
        rows.append(
            SweepRow(
                name=name,
                overrides=dict(overrides),
                mean_iou=mean_iou,
                mean_f1=mean_f1,
                micro_iou=micro_iou,
                micro_f1=micro_f1,
                per_pair_iou=per_pair,
            )
        )

    if delta_mode == "baseline":
        ref = next(r for r in rows if r.name == baseline)
        for row in rows:
            if row.name != ref.name:
                row.delta_iou = row.mean_iou - ref.mean_iou
                row.delta_f1 = row.mean_f1 - ref.mean_f1
    else:
        for prev, row in zip(rows, rows[1:]):
            row.delta_iou = row.mean_iou - prev.mean_iou
            row.delta_f1 = row.mean_f1 - prev.mean_f1

    return SweepResult(rows=rows, delta_mode=delta_mode, baseline=baseline)


def _fmt_delta(delta: Optional[float]) -> str:
    if delta is None:
        return "-"
    arrow = "+" if delta >= 0 else "-"
    return f"{arrow}{abs(100.0 * delta):.2f}"


def format_sweep(result: SweepResult) -> str:
    header = f"{'row':<16} {'mean_iou':>9} {'mean_f1':>9} {'d_iou':>8} {'d_f1':>8}"
    lines = [header, "-" * len(header)]
    for row in result.rows:
        lines.append(
            f"{row.name:<16} {pct(row.mean_iou):>9} {pct(row.mean_f1):>9} "
            f"{_fmt_delta(row.delta_iou):>8} {_fmt_delta(row.delta_f1):>8}"
        )
    return "\n".join(lines) + "\n"


def write_sweep_csv(result: SweepResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(["row", "mean_iou", "mean_f1", "micro_iou", "micro_f1", "delta_iou", "delta_f1", "overrides"])
        for row in result.rows:
            writer.writerow(
                [
                    row.name,
                    pct(row.mean_iou),
                    pct(row.mean_f1),
                    pct(row.micro_iou),
                    pct(row.micro_f1),
                    _fmt_delta(row.delta_iou),
                    _fmt_delta(row.delta_f1),
                    ";".join(f"{k}={v}" for k, v in sorted(row.overrides.items())),
                ]
            )
