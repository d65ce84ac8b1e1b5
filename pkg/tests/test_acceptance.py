"""Acceptance gate: every shipped-contract criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one PASS line per
criterion; any failure is a hard test failure.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from ovcd.backends.base import BackendBundle
from ovcd.backends.scene import generate_corpus
from ovcd.backends.synthetic import SyntheticBackend
from ovcd.bench import (
    ablation_grid,
    format_sweep,
    run_sweep,
    scene_eval_items,
    transition_count_grid,
)
from ovcd.bridge import build_bridged_sequence, histogram_match, match_channel
from ovcd.memory import StableRegion, aggregate_exemplar
from ovcd.metrics import derive, ConfusionCounts
from ovcd.pipeline import PipelineConfig, run_pipeline
from ovcd.bench import queries_for
from ovcd.raster import BitMask, RasterImage, ScalarMap, connected_components, mask_iou
from ovcd.rectify import RectificationParams, coverage_ratio, fusion_weight, rectify

E2E_SEED = 20260810
E2E_PAIRS = 20
E2E_SIZE = 128
E2E_CONFIG = PipelineConfig(tile_size=64, tile_stride=32)


def report(name: str) -> None:
    print(f"[PASS] {name}")


@pytest.fixture(scope="module")
def bundle():
    return BackendBundle.single(SyntheticBackend())


@pytest.fixture(scope="module")
def nuisance_suite():
    return scene_eval_items(generate_corpus(E2E_SEED, E2E_PAIRS, size=E2E_SIZE))


def test_fusion_weight_unit_suite():
    start = time.monotonic()
    params = RectificationParams(tau_miss=0.2, tau_keep=0.8, a_min=0)
    expected = {0.0: 1.0, 0.1: 1.0, 0.2: 1.0, 0.5: 0.5, 0.8: 0.0, 1.0: 0.0}
    for rho, want in expected.items():
        assert abs(fusion_weight(rho, params) - want) <= 1e-12
    eps = 1e-10
    for threshold in (0.2, 0.8):
        at = fusion_weight(threshold, params)
        assert abs(fusion_weight(threshold - eps, params) - at) <= 1e-9
        assert abs(fusion_weight(threshold + eps, params) - at) <= 1e-9
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    report(f"fusion-weight unit suite (exact to 1e-12, continuous at thresholds, {elapsed:.3f}s)")


def test_rectification_fixed_points():
    start = time.monotonic()
    rng = np.random.default_rng(101)
    params = RectificationParams(tau_miss=0.2, tau_keep=0.8, a_min=0)
    for _ in range(100):
        local = ScalarMap(rng.normal(size=(64, 64)).astype(np.float32))
        global_ = ScalarMap(rng.normal(size=(64, 64)).astype(np.float32))
        support = BitMask(rng.random((64, 64)) < 0.3)

        fixed = rectify(local, local, support, params)
        assert (fixed.values == local.values).all()  # bit-exact fixed point

        out = rectify(local, global_, support, params)
        local_support = BitMask(local.values > 0)
        for comp in connected_components(support, 8).components:
            weight = fusion_weight(coverage_ratio(comp.pixels, local_support), params)
            rows, cols = comp.pixels[:, 0], comp.pixels[:, 1]
            if weight == 0.0:
                assert (out.values[rows, cols] == local.values[rows, cols]).all()
            elif weight == 1.0:
                assert (out.values[rows, cols] == global_.values[rows, cols]).all()
        outside = ~support.bits
        assert (out.values[outside] == local.values[outside]).all()
    elapsed = time.monotonic() - start
    assert elapsed < 5.0
    report(f"rectification fixed points on 100 random 64x64 cases ({elapsed:.2f}s)")


def _oracle_match_channel(src, ref):
    src_cum = np.cumsum(np.bincount(src.ravel(), minlength=256))
    ref_cum = np.cumsum(np.bincount(ref.ravel(), minlength=256))
    src_total, ref_total = int(src_cum[-1]), int(ref_cum[-1])
    lut = np.full(256, 255, dtype=np.uint8)
    for v in range(256):
        target = Fraction(int(src_cum[v]), src_total)
        for u in range(256):
            if Fraction(int(ref_cum[u]), ref_total) >= target:
                lut[v] = u
                break
    return lut[src]


def _balanced_random_channel(rng):
    # every intensity appears 4096/256 = 16 times, spatially shuffled
    values = np.repeat(np.arange(256, dtype=np.uint8), 16)
    rng.shuffle(values)
    return values.reshape(64, 64)


def test_histogram_matching_suite():
    start = time.monotonic()
    rng = np.random.default_rng(102)
    bound = max(1 / 256, 1 / (64 * 64))
    for _ in range(50):
        src = _balanced_random_channel(rng)
        ref = _balanced_random_channel(rng)
        out = match_channel(src, ref)
        assert (out == _oracle_match_channel(src, ref)).all()  # bit-exact vs oracle
        out_cdf = np.cumsum(np.bincount(out.ravel(), minlength=256)) / out.size
        ref_cdf = np.cumsum(np.bincount(ref.ravel(), minlength=256)) / ref.size
        assert np.abs(out_cdf - ref_cdf).max() <= bound

    identity = _balanced_random_channel(rng)
    assert (match_channel(identity, identity) == identity).all()  # exact identity
    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    report(f"histogram matching: KS <= 1/256, identity exact, oracle bit-exact ({elapsed:.2f}s)")


def test_bridged_sequence_suite():
    rng = np.random.default_rng(103)
    t1 = RasterImage(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
    t2 = RasterImage(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
    aligned = histogram_match(t1, t2).data.astype(np.int16)
    dst = t2.data.astype(np.int16)
    lo, hi = np.minimum(aligned, dst), np.maximum(aligned, dst)
    for k in (0, 1, 3, 5):
        seq = build_bridged_sequence(t1, t2, k)
        assert seq.lambdas == [step / (k + 1) for step in range(1, k + 1)]  # exact
        assert (seq.frames[0].data == t1.data).all()
        assert (seq.frames[-1].data == t2.data).all()
        for frame in seq.frames[1:-1]:
            arr = frame.data.astype(np.int16)
            assert (arr >= lo - 1).all() and (arr <= hi + 1).all()
    assert PipelineConfig().k_transition == 3  # shipped default
    report("bridged sequence: lambdas exact, endpoints bit-identical, interior bounded, K=3 default")


def _flood_fill(bits, connectivity):
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=int)
    neighbors = (
        [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
        if connectivity == 8
        else [(-1, 0), (1, 0), (0, -1), (0, 1)]
    )
    count = 0
    for r in range(h):
        for c in range(w):
            if bits[r, c] and labels[r, c] == 0:
                count += 1
                labels[r, c] = count
                stack = [(r, c)]
                while stack:
                    y, x = stack.pop()
                    for dy, dx in neighbors:
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and labels[ny, nx] == 0:
                            labels[ny, nx] = count
                            stack.append((ny, nx))
    return labels, count


def test_connected_components_oracle_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(104)
    for i in range(200):
        bits = rng.random((32, 32)) < rng.uniform(0.25, 0.6)
        connectivity = 8 if i % 2 == 0 else 4
        got = connected_components(BitMask(bits), connectivity)
        expected, count = _flood_fill(bits, connectivity)
        assert len(got.components) == count
        mapping, reverse = {}, {}
        fg = expected > 0
        for e, g in zip(expected[fg], got.label_map[fg]):
            assert g > 0
            assert mapping.setdefault(e, g) == g
            assert reverse.setdefault(g, e) == e
    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    report(f"connected components equal flood-fill oracle on 200 masks, both connectivities ({elapsed:.2f}s)")


def test_exemplar_algebra_suite():
    rng = np.random.default_rng(105)

    def region(alpha):
        return StableRegion(np.array([[0, 0]]), float(alpha), "1to2")

    for _ in range(100):
        n = int(rng.integers(1, 12))
        alphas = rng.uniform(0.05, 1.0, size=n)
        feats = [rng.normal(size=6) for _ in range(n)]
        weighted = aggregate_exemplar([region(a) for a in alphas], feats, weighted=True)
        expected = sum(a * f for a, f in zip(alphas, feats)) / alphas.sum()
        assert np.abs(weighted.vector - expected).max() <= 1e-9

        equal = aggregate_exemplar([region(a) for a in alphas], feats, weighted=False)
        assert np.abs(equal.vector - np.mean(feats, axis=0)).max() <= 1e-9

    single = aggregate_exemplar([region(0.4)], [np.array([1.0, 2.0])])
    assert (single.vector == np.array([1.0, 2.0])).all()
    report("exemplar algebra: weighted mean to 1e-9, equal-weight mode, single-region identity")


def test_metric_identity_suite():
    rng = np.random.default_rng(106)
    for _ in range(500):
        counts = ConfusionCounts(*(int(x) for x in rng.integers(0, 5000, size=4)))
        m = derive(counts)
        assert abs(m.f1 - 2 * m.iou / (1 + m.iou)) <= 1e-12
    # published pair: IoU 72.5 and F1 84.1 (percent) on the building benchmark
    assert abs(100 * (2 * 0.725 / 1.725) - 84.1) < 0.05
    report("metric identity: F1 = 2 IoU/(1+IoU) to 1e-12; published 72.5/84.1 pair consistent")


def test_end_to_end_synthetic_suite(bundle, nuisance_suite):
    start = time.monotonic()

    def run_once():
        digests = []
        for item in nuisance_suite:
            outputs = run_pipeline(item.t1, item.t2, queries_for(list(item.truths)), E2E_CONFIG, bundle)
            assert not outputs.failures
            for category, truth in item.truths.items():
                mask = outputs.results[category].change_mask
                assert mask_iou(mask, truth) >= 0.95, f"{item.name}/{category}"
                digests.append(mask.bits.tobytes())
        return digests

    first = run_once()
    second = run_once()
    assert first == second  # bit-identical reruns
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    report(
        f"end-to-end: {E2E_PAIRS} nuisance-shifted pairs, IoU >= 0.95 per pair, "
        f"bit-identical reruns ({elapsed:.1f}s)"
    )


def test_ablation_and_sensitivity_structure(bundle, nuisance_suite):
    base = PipelineConfig(tile_size=64, tile_stride=32)

    ablation = run_sweep(ablation_grid(), nuisance_suite, base, bundle, delta_mode="baseline")
    names = [row.name for row in ablation.rows]
    assert names == ["baseline", "+ctmr", "+rectification", "full"]
    assert ablation.rows[0].delta_iou is None  # baseline row carries no delta
    assert all(row.delta_iou is not None for row in ablation.rows[1:])

    ctmr_off = ablation.rows[0].mean_iou
    ctmr_on = ablation.rows[1].mean_iou
    assert ctmr_on >= ctmr_off  # directional claim on the nuisance suite

    sensitivity = run_sweep(
        transition_count_grid((0, 1, 3, 5)), nuisance_suite, base, bundle, delta_mode="previous"
    )
    assert [row.name for row in sensitivity.rows] == ["k=0", "k=1", "k=3", "k=5"]
    assert sensitivity.rows[0].delta_iou is None
    assert all(row.delta_iou is not None for row in sensitivity.rows[1:])

    table = format_sweep(ablation) + format_sweep(sensitivity)
    assert "mean_iou" in table and "d_iou" in table
    report(
        f"ablation/sensitivity structure: 4+4 rows with delta columns; "
        f"ctmr on {100 * ctmr_on:.2f} >= off {100 * ctmr_off:.2f} mean IoU"
    )
