import numpy as np
import pytest

from conftest import make_scene, scene_object
from ovcd.backends.base import BackendCapabilities
from ovcd.errors import ConfigError
from ovcd.query import PromptSpec
from ovcd.raster import RasterImage, ScalarMap, mask_iou
from ovcd.tiling import plan_tiles, run_global, run_local


class SequenceSegmenter:
    """Serves a fixed sequence of constant logit values, one per call."""

    def __init__(self, values, presence=1.0):
        self.values = list(values)
        self.presence = presence
        self.calls = 0

    def capabilities(self):
        return BackendCapabilities(4096, 1, 4, 8)  # concurrency 1: call order is tile order

    def segment(self, image, prompt):
        value = self.values[self.calls % len(self.values)]
        self.calls += 1
        logits = ScalarMap(np.full((image.height, image.width), value, dtype=np.float32))
        return logits, {p: self.presence for p in prompt.text_prompts}


def text_prompt(*prompts):
    return PromptSpec(list(prompts))


class TestPlanTiles:
    def test_regular_grid(self):
        plan = plan_tiles(256, 256, 128, 64)
        assert len(plan.rects) == 9  # 3 positions per axis

    def test_image_smaller_than_tile(self):
        plan = plan_tiles(100, 60, 128, 64)
        assert plan.rects == ((0, 0, 100, 60),)

    def test_last_tile_clamped_flush(self):
        plan = plan_tiles(300, 300, 128, 128)
        xs = sorted({r[0] for r in plan.rects})
        assert xs == [0, 128, 172]  # 172 = 300 - 128

    def test_full_coverage_on_random_sizes(self):
        rng = np.random.default_rng(21)
        for _ in range(40):
            w = int(rng.integers(16, 200))
            h = int(rng.integers(16, 200))
            tile = int(rng.integers(8, 64))
            stride = int(rng.integers(1, tile + 1))
            plan = plan_tiles(w, h, tile, stride)
            covered = np.zeros((h, w), dtype=np.int32)
            for x, y, tw, th in plan.rects:
                assert 0 <= x and 0 <= y and x + tw <= w and y + th <= h
                covered[y : y + th, x : x + tw] += 1
            assert (covered >= 1).all()

    def test_deterministic(self):
        assert plan_tiles(333, 222, 64, 48) == plan_tiles(333, 222, 64, 48)

    def test_invalid_stride(self):
        with pytest.raises(ConfigError):
            plan_tiles(100, 100, 32, 0)
        with pytest.raises(ConfigError):
            plan_tiles(100, 100, 32, 33)


class TestRunLocal:
    def test_single_tile_identity(self):
        image = RasterImage(np.zeros((32, 32, 3), dtype=np.uint8))
        plan = plan_tiles(32, 32, 64, 32)
        seg = SequenceSegmenter([1.5])
        result = run_local(image, text_prompt("building"), plan, seg)
        assert (result.logits.values == 1.5).all()
        assert result.support.bits.all()
        assert result.presence == {"building": 1.0}

    def test_overlapping_tiles_mean(self):
        # two 8-wide tiles over a 12-wide strip overlap in columns 4..7
        image = RasterImage(np.zeros((8, 12, 3), dtype=np.uint8))
        plan = plan_tiles(12, 8, 8, 4)
        assert plan.rects == ((0, 0, 8, 8), (4, 0, 8, 8))
        seg = SequenceSegmenter([1.0, 3.0])
        result = run_local(image, text_prompt("x"), plan, seg)
        assert (result.logits.values[:, 0:4] == 1.0).all()
        assert (result.logits.values[:, 4:8] == 2.0).all()
        assert (result.logits.values[:, 8:12] == 3.0).all()

    def test_max_merge_rule(self):
        image = RasterImage(np.zeros((8, 12, 3), dtype=np.uint8))
        plan = plan_tiles(12, 8, 8, 4)
        seg = SequenceSegmenter([-1.0, 3.0])
        result = run_local(image, text_prompt("x"), plan, seg, merge_rule="max")
        assert (result.logits.values[:, 0:4] == -1.0).all()
        assert (result.logits.values[:, 4:8] == 3.0).all()
        assert (result.support.bits[:, 0:4] == False).all()  # noqa: E712
        assert result.support.bits[:, 4:12].all()

    def test_merged_logit_between_tile_extremes(self):
        rng = np.random.default_rng(22)
        image = RasterImage(rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8))
        plan = plan_tiles(24, 24, 16, 8)
        values = list(rng.normal(size=len(plan.rects)))
        seg = SequenceSegmenter(values)
        result = run_local(image, text_prompt("x"), plan, seg)
        assert result.logits.values.min() >= min(values) - 1e-6
        assert result.logits.values.max() <= max(values) + 1e-6

    def test_presence_is_max_over_tiles(self):
        image = RasterImage(np.zeros((8, 12, 3), dtype=np.uint8))
        plan = plan_tiles(12, 8, 8, 4)

        class VaryingPresence(SequenceSegmenter):
            def segment(self, inner_image, prompt):
                logits, _ = super().segment(inner_image, prompt)
                return logits, {p: 0.2 if self.calls == 1 else 0.9 for p in prompt.text_prompts}

        seg = VaryingPresence([0.0, 0.0])
        result = run_local(image, text_prompt("x"), plan, seg)
        assert result.presence["x"] == 0.9

    def test_synthetic_scene_support_matches_truth(self, backend):
        scene = make_scene([scene_object("water", params=(10, 10, 40, 30))], size=96)
        t1, _ = scene.render()
        plan = plan_tiles(96, 96, 48, 24)
        result = run_local(t1, text_prompt("water"), plan, backend)
        truth = scene.category_footprint("water", 1)
        assert mask_iou(result.support, truth) >= 0.95


class TestRunGlobal:
    def test_downscale_one_equals_single_tile(self):
        image = RasterImage(np.zeros((16, 16, 3), dtype=np.uint8))
        seg = SequenceSegmenter([2.5])
        result = run_global(image, text_prompt("x"), seg, downscale=1.0)
        assert (result.logits.values == 2.5).all()
        assert result.logits.shape == (16, 16)

    def test_constant_backend_at_any_downscale(self):
        image = RasterImage(np.zeros((20, 30, 3), dtype=np.uint8))
        for downscale in (1.0, 0.5, 0.25):
            seg = SequenceSegmenter([1.25])
            result = run_global(image, text_prompt("x"), seg, downscale=downscale)
            assert result.logits.shape == (20, 30)
            assert np.allclose(result.logits.values, 1.25)

    def test_synthetic_downscale_half_keeps_support(self, backend):
        scene = make_scene([scene_object("building", params=(16, 16, 48, 40))], size=96)
        t1, _ = scene.render()
        result = run_global(t1, text_prompt("building"), backend, downscale=0.5)
        truth = scene.category_footprint("building", 1)
        assert mask_iou(result.support, truth) >= 0.9

    def test_invalid_downscale(self):
        image = RasterImage(np.zeros((8, 8, 3), dtype=np.uint8))
        with pytest.raises(ConfigError):
            run_global(image, text_prompt("x"), SequenceSegmenter([1.0]), downscale=0.0)
