import numpy as np
import pytest

from ovcd.errors import DimensionMismatch
from ovcd.metrics import (
    ConfusionCounts,
    PairEval,
    aggregate,
    aggregate_counts,
    build_report,
    compute_metrics,
    confusion,
    derive,
    format_report,
    pct,
)
from ovcd.raster import BitMask


def mask_of(bits):
    return BitMask(np.asarray(bits, dtype=bool))


class TestComputeMetrics:
    def test_perfect_prediction(self):
        bits = np.zeros((4, 4), dtype=bool)
        bits[1:3, 1:3] = True
        counts, metrics = compute_metrics(mask_of(bits), mask_of(bits))
        assert metrics.precision == metrics.recall == metrics.f1 == metrics.iou == 1.0
        assert counts.tp == 4 and counts.fp == 0 and counts.fn == 0

    def test_arithmetic_example(self):
        # tp=3, fp=1, fn=2 over a 1x7 strip (one extra tn pixel)
        pred = mask_of([[1, 1, 1, 1, 0, 0, 0]])
        gt = mask_of([[1, 1, 1, 0, 1, 1, 0]])
        counts, metrics = compute_metrics(pred, gt)
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (3, 1, 2, 1)
        assert metrics.precision == pytest.approx(0.75)
        assert metrics.recall == pytest.approx(0.6)
        assert metrics.f1 == pytest.approx(2 / 3)
        assert metrics.iou == pytest.approx(0.5)

    def test_both_empty_is_perfect(self):
        counts, metrics = compute_metrics(mask_of(np.zeros((3, 3))), mask_of(np.zeros((3, 3))))
        assert metrics.precision == metrics.recall == metrics.f1 == metrics.iou == 1.0

    def test_empty_prediction_nonempty_truth(self):
        gt = mask_of([[1, 1, 0]])
        _, metrics = compute_metrics(mask_of([[0, 0, 0]]), gt)
        assert metrics.recall == 0.0
        assert metrics.precision == 0.0
        assert metrics.f1 == 0.0

    def test_counts_sum_to_total(self):
        rng = np.random.default_rng(61)
        pred = mask_of(rng.random((9, 9)) < 0.5)
        gt = mask_of(rng.random((9, 9)) < 0.5)
        counts = confusion(pred, gt)
        assert counts.total == 81

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            confusion(BitMask.zeros(2, 2), BitMask.zeros(3, 3))

    def test_f1_iou_identity_exact(self):
        rng = np.random.default_rng(62)
        for _ in range(200):
            counts = ConfusionCounts(
                tp=int(rng.integers(0, 1000)),
                fp=int(rng.integers(0, 1000)),
                fn=int(rng.integers(0, 1000)),
                tn=int(rng.integers(0, 1000)),
            )
            m = derive(counts)
            assert abs(m.f1 - 2 * m.iou / (1 + m.iou)) <= 1e-12

    def test_published_levir_pair_satisfies_identity(self):
        # reported scores: IoU 72.5 and F1 84.1 (percent)
        iou = 0.725
        f1_from_iou = 2 * iou / (1 + iou)
        assert abs(100 * f1_from_iou - 84.1) < 0.05

    def test_permutation_invariance(self):
        rng = np.random.default_rng(63)
        pred = rng.random((8, 8)) < 0.5
        gt = rng.random((8, 8)) < 0.5
        perm = rng.permutation(64)
        a = confusion(mask_of(pred), mask_of(gt))
        b = confusion(
            mask_of(pred.ravel()[perm].reshape(8, 8)), mask_of(gt.ravel()[perm].reshape(8, 8))
        )
        assert a == b


class TestAggregation:
    def test_single_item_micro_equals_macro(self):
        counts = ConfusionCounts(10, 2, 3, 85)
        micro = aggregate([counts], "micro")
        macro = aggregate([counts], "macro")
        assert micro == macro == derive(counts)

    def test_macro_mean_of_two_categories(self):
        # IoU 0.2 and 0.8 -> macro mean 0.5
        a = ConfusionCounts(tp=20, fp=40, fn=40, tn=0)  # IoU 0.2
        b = ConfusionCounts(tp=80, fp=10, fn=10, tn=0)  # IoU 0.8
        macro = aggregate([a, b], "macro")
        assert macro.iou == pytest.approx(0.5)

    def test_micro_equals_pooled_counts_oracle(self):
        rng = np.random.default_rng(64)
        for _ in range(30):
            items = [
                ConfusionCounts(*(int(x) for x in rng.integers(0, 500, size=4)))
                for _ in range(int(rng.integers(1, 8)))
            ]
            micro = aggregate(items, "micro")
            pooled = derive(aggregate_counts(items))
            assert micro == pooled

    def test_pair_order_invariance_micro(self):
        rng = np.random.default_rng(65)
        items = [ConfusionCounts(*(int(x) for x in rng.integers(0, 100, size=4))) for _ in range(5)]
        assert aggregate(items, "micro") == aggregate(list(reversed(items)), "micro")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([], "micro")


class TestReport:
    def _pairs(self):
        a = ConfusionCounts(50, 10, 10, 30)
        b = ConfusionCounts(20, 5, 15, 60)
        return [
            PairEval("p0", "building", a, derive(a)),
            PairEval("p1", "water", b, derive(b)),
        ]

    def test_mean_metrics_are_macro_over_categories(self):
        report = build_report(self._pairs())
        per_cat = [report.per_category["building"], report.per_category["water"]]
        assert report.mean_iou == pytest.approx(np.mean([m.iou for m in per_cat]))
        assert report.mean_f1 == pytest.approx(np.mean([m.f1 for m in per_cat]))

    def test_format_uses_one_decimal_percent(self):
        text = format_report(build_report(self._pairs()))
        assert pct(0.725) == "72.5"
        assert "71.4" in text or "." in text  # percent formatting present
        for line in text.splitlines():
            assert "0.7142" not in line  # no raw ratios

    def test_metrics_in_unit_range(self):
        report = build_report(self._pairs())
        for m in (report.micro, report.macro, *report.per_category.values()):
            for v in (m.precision, m.recall, m.f1, m.iou):
                assert 0.0 <= v <= 1.0
