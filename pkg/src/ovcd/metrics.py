"""Pixel confusion counts and derived change-detection metrics.

F1 and IoU are both computed straight from the counts (F1 = 2tp / (2tp + fp
+ fn), IoU = tp / (tp + fp + fn)), so the identity F1 = 2 IoU / (1 + IoU)
holds to machine precision for any shared counts. When both prediction and
truth are empty, every ratio is defined as 1 (no disagreement).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch
from .raster import BitMask

AggregationMode = Literal["micro", "macro"]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


@dataclass(frozen=True)
class MetricSet:
    precision: float
    recall: float
    f1: float
    iou: float


def confusion(pred: BitMask, gt: BitMask) -> ConfusionCounts:
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"prediction {pred.shape} vs truth {gt.shape}")
    p = pred.bits
    g = gt.bits
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return ConfusionCounts(tp, fp, fn, tn)


def derive(counts: ConfusionCounts) -> MetricSet:
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    if tp + fp + fn == 0:  # empty prediction against empty truth
        return MetricSet(1.0, 1.0, 1.0, 1.0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn)
    iou = tp / (tp + fp + fn)
    return MetricSet(precision, recall, f1, iou)


def compute_metrics(pred: BitMask, gt: BitMask) -> tuple[ConfusionCounts, MetricSet]:
    counts = confusion(pred, gt)
    return counts, derive(counts)


def aggregate_counts(counts: Iterable[ConfusionCounts]) -> ConfusionCounts:
    total = ConfusionCounts(0, 0, 0, 0)
    for c in counts:
        total = total + c
    return total


def aggregate(counts: Sequence[ConfusionCounts], mode: AggregationMode) -> MetricSet:
    """micro: metrics of pooled counts; macro: unweighted mean of per-item metrics."""
    if not counts:
        raise ValueError("nothing to aggregate")
    if mode == "micro":
        return derive(aggregate_counts(counts))
    if mode == "macro":
        per_item = [derive(c) for c in counts]
        return MetricSet(
            precision=float(np.mean([m.precision for m in per_item])),
            recall=float(np.mean([m.recall for m in per_item])),
            f1=float(np.mean([m.f1 for m in per_item])),
            iou=float(np.mean([m.iou for m in per_item])),
        )
    raise ValueError(f"unknown aggregation mode {mode!r}")


@dataclass
class PairEval:
    name: str
    category: Optional[str]
    counts: ConfusionCounts
    metrics: MetricSet


@dataclass
class EvalReport:
    pairs: list[PairEval]
    micro: MetricSet
    macro: MetricSet
    per_category: dict[str, MetricSet]  # micro within each category
    mean_f1: float  # macro over categories
    mean_iou: float
    config: dict


def build_report(pairs: Sequence[PairEval], config: Optional[dict] = None) -> EvalReport:
    if not pairs:
        raise ValueError("report needs at least one evaluated pair")
    micro = aggregate([p.counts for p in pairs], "micro")
    macro = aggregate([p.counts for p in pairs], "macro")

    categories: dict[str, list[ConfusionCounts]] = {}
    for p in pairs:
        categories.setdefault(p.category or "change", []).append(p.counts)
    per_category = {cat: aggregate(cs, "micro") for cat, cs in categories.items()}
    mean_f1 = float(np.mean([m.f1 for m in per_category.values()]))
    mean_iou = float(np.mean([m.iou for m in per_category.values()]))
    return EvalReport(
        pairs=list(pairs),
        micro=micro,
        macro=macro,
        per_category=per_category,
        mean_f1=mean_f1,
        mean_iou=mean_iou,
        config=dict(config or {}),
    )


def pct(x: float) -> str:
    """Metric formatted as a percentage with one decimal."""
    return f"{100.0 * x:.1f}"


def format_report(report: EvalReport) -> str:
    lines = ["pair,category,precision,recall,f1,iou".replace(",", "  ")]
    for p in report.pairs:
        m = p.metrics
        lines.append(
            f"{p.name}  {p.category or 'change'}  {pct(m.precision)}  {pct(m.recall)}  "
            f"{pct(m.f1)}  {pct(m.iou)}"
        )
    lines.append("")
    mi, ma = report.micro, report.macro
    lines.append(
        f"micro  precision {pct(mi.precision)}  recall {pct(mi.recall)}  "
        f"f1 {pct(mi.f1)}  iou {pct(mi.iou)}"
    )
    lines.append(
        f"macro  precision {pct(ma.precision)}  recall {pct(ma.recall)}  "
        f"f1 {pct(ma.f1)}  iou {pct(ma.iou)}"
    )
    for cat, m in report.per_category.items():
        lines.append(f"category {cat}  f1 {pct(m.f1)}  iou {pct(m.iou)}")
    lines.append(f"mean_f1 {pct(report.mean_f1)}  mean_iou {pct(report.mean_iou)}")
    return "\n".join(lines) + "\n"


def report_csv_rows(report: EvalReport) -> list[list[str]]:
    rows = [["pair", "category", "tp", "fp", "fn", "tn", "precision", "recall", "f1", "iou"]]
    for p in report.pairs:
        c, m = p.counts, p.metrics
        rows.append(
            [
                p.name,
                p.category or "change",
                str(c.tp),
                str(c.fp),
                str(c.fn),
                str(c.tn),
                pct(m.precision),
                pct(m.recall),
                pct(m.f1),
                pct(m.iou),
            ]
        )
    for label, m in (("micro", report.micro), ("macro", report.macro)):
        rows.append(
            ["__aggregate__", label, "", "", "", "", pct(m.precision), pct(m.recall), pct(m.f1), pct(m.iou)]
        )
    return rows
