import numpy as np
import pytest

from ovcd.errors import DimensionMismatch
from ovcd.raster import (
    BitMask,
    RasterImage,
    ScalarMap,
    connected_components,
    filter_by_area,
    intersect,
    load_float_grid,
    load_image_png,
    load_mask_png,
    mask_area,
    mask_iou,
    save_float_grid,
    save_image_png,
    save_mask_png,
    union,
)


def flood_fill_labels(bits, connectivity):
    """Independent labeling oracle: explicit-stack flood fill."""
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=int)
    if connectivity == 8:
        neighbors = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        neighbors = [(-1, 0), (1, 0), (0, -1), (0, 1)]
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


def assert_label_equivalent(got, expected):
    """Same partition of the foreground, up to a relabeling bijection."""
    assert (got > 0).sum() == (expected > 0).sum()
    mapping = {}
    reverse = {}
    fg = expected > 0
    for e, g in zip(expected[fg], got[fg]):
        assert g > 0
        assert mapping.setdefault(e, g) == g
        assert reverse.setdefault(g, e) == e


class TestConnectedComponents:
    def test_diagonal_pixels_8_connected(self):
        mask = BitMask(np.array([[1, 0], [0, 1]], dtype=bool))
        assert len(connected_components(mask, 8).components) == 1

    def test_diagonal_pixels_4_connected(self):
        mask = BitMask(np.array([[1, 0], [0, 1]], dtype=bool))
        assert len(connected_components(mask, 4).components) == 2

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_random_masks_match_flood_fill_oracle(self, connectivity):
        rng = np.random.default_rng(11)
        for _ in range(50):
            bits = rng.random((16, 16)) < 0.45
            got = connected_components(BitMask(bits), connectivity)
            expected, count = flood_fill_labels(bits, connectivity)
            assert len(got.components) == count
            assert_label_equivalent(got.label_map, expected)

    def test_empty_mask(self):
        got = connected_components(BitMask.zeros(5, 4), 8)
        assert got.components == []
        assert got.label_map.sum() == 0

    def test_ids_follow_raster_scan_order(self):
        bits = np.zeros((6, 6), dtype=bool)
        bits[0, 4] = True  # first in raster order
        bits[3:5, 0:2] = True
        comps = connected_components(BitMask(bits), 8)
        assert [c.id for c in comps.components] == [1, 2]
        assert comps.components[0].area == 1
        assert comps.components[1].area == 4

    def test_component_invariants(self):
        rng = np.random.default_rng(3)
        bits = rng.random((20, 20)) < 0.4
        comps = connected_components(BitMask(bits), 8)
        covered = np.zeros_like(bits)
        total = 0
        for comp in comps.components:
            rows, cols = comp.pixels[:, 0], comp.pixels[:, 1]
            assert not covered[rows, cols].any()  # pairwise disjoint
            covered[rows, cols] = True
            total += comp.area
            x, y, w, h = comp.bbox
            assert cols.min() == x and cols.max() == x + w - 1
            assert rows.min() == y and rows.max() == y + h - 1
        assert (covered == bits).all()  # union of components is the foreground
        assert total == bits.sum()

    def test_relabeling_single_component_is_idempotent(self):
        bits = np.zeros((8, 8), dtype=bool)
        bits[2:5, 2:6] = True
        comps = connected_components(BitMask(bits), 8)
        assert len(comps.components) == 1
        again = connected_components(comps.component_mask(1), 8)
        assert len(again.components) == 1

    def test_large_mask_no_recursion_limit(self):
        # a long snake would blow a recursive labeler's stack
        bits = np.zeros((512, 512), dtype=bool)
        for r in range(512):
            if r % 2 == 0:
                bits[r, :] = True
            elif (r // 2) % 2 == 0:
                bits[r, -1] = True
            else:
                bits[r, 0] = True
        comps = connected_components(BitMask(bits), 8)
        assert len(comps.components) == 1


class TestFilterByArea:
    def test_small_component_dropped(self):
        bits = np.zeros((10, 10), dtype=bool)
        bits[0, 0:3] = True  # area 3
        bits[5:10, 0:10] = True  # area 50
        comps = filter_by_area(connected_components(BitMask(bits), 8), 10)
        assert [c.area for c in comps.components] == [50]
        assert [c.id for c in comps.components] == [1]

    def test_a_min_zero_is_identity(self):
        rng = np.random.default_rng(5)
        bits = rng.random((12, 12)) < 0.4
        comps = connected_components(BitMask(bits), 8)
        filtered = filter_by_area(comps, 0)
        assert [c.area for c in filtered.components] == [c.area for c in comps.components]
        assert (filtered.label_map == comps.label_map).all()

    def test_count_matches_direct_area_count(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            bits = rng.random((24, 24)) < 0.35
            comps = connected_components(BitMask(bits), 8)
            for a_min in (0, 1, 2, 4, 8, 16):
                kept = filter_by_area(comps, a_min)
                expected = sum(1 for c in comps.components if c.area >= a_min)
                assert len(kept.components) == expected
                assert [c.id for c in kept.components] == list(range(1, expected + 1))


class TestMaskOps:
    def test_iou_identical_nonempty(self):
        bits = np.zeros((4, 4), dtype=bool)
        bits[1:3, 1:3] = True
        m = BitMask(bits)
        assert mask_iou(m, m) == 1.0

    def test_iou_disjoint(self):
        a = BitMask(np.eye(4, dtype=bool))
        b = BitMask(np.flipud(np.eye(4, dtype=bool)))
        b.bits[0, 3] = False  # remove the shared center-free overlap case
        a_ = BitMask(np.zeros((4, 4), dtype=bool))
        a_.bits[0, 0] = True
        b_ = BitMask(np.zeros((4, 4), dtype=bool))
        b_.bits[3, 3] = True
        assert mask_iou(a_, b_) == 0.0

    def test_iou_half(self):
        a = BitMask(np.zeros((2, 3), dtype=bool))
        a.bits[0, :] = True  # 3 pixels
        b = BitMask(np.zeros((2, 3), dtype=bool))
        b.bits[:, 0:2] = True  # pixels (0,0),(0,1),(1,0),(1,1)
        b.bits[1, 2] = True
        # intersection {(0,0),(0,1)}... construct the documented 3/6 case directly
        a = BitMask(np.array([[1, 1, 1, 0, 0, 0]], dtype=bool))
        b = BitMask(np.array([[1, 1, 1, 1, 1, 1]], dtype=bool))
        assert mask_iou(a, b) == 0.5

    def test_iou_both_empty_is_one(self):
        assert mask_iou(BitMask.zeros(3, 3), BitMask.zeros(3, 3)) == 1.0

    def test_iou_symmetry(self):
        rng = np.random.default_rng(2)
        a = BitMask(rng.random((8, 8)) < 0.5)
        b = BitMask(rng.random((8, 8)) < 0.5)
        assert mask_iou(a, b) == mask_iou(b, a)

    def test_intersect_union_area(self):
        a = BitMask(np.array([[1, 1, 0]], dtype=bool))
        b = BitMask(np.array([[0, 1, 1]], dtype=bool))
        assert intersect(a, b).bits.tolist() == [[False, True, False]]
        assert union(a, b).bits.tolist() == [[True, True, True]]
        assert mask_area(a) == 2

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mask_iou(BitMask.zeros(2, 2), BitMask.zeros(3, 2))


class TestSerialization:
    def test_mask_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        mask = BitMask(rng.random((17, 23)) < 0.5)
        path = tmp_path / "m.png"
        save_mask_png(mask, path)
        assert (load_mask_png(path).bits == mask.bits).all()

    def test_image_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        image = RasterImage(rng.integers(0, 256, size=(9, 11, 3), dtype=np.uint8))
        path = tmp_path / "img.png"
        save_image_png(image, path)
        assert (load_image_png(path).data == image.data).all()

    def test_float_grid_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        m = ScalarMap(rng.normal(size=(5, 7)).astype(np.float32))
        path = tmp_path / "grid.bin"
        save_float_grid(m, path)
        back = load_float_grid(path)
        assert back.shape == m.shape
        assert (back.values == m.values).all()  # bit-exact

    def test_float_grid_header(self, tmp_path):
        m = ScalarMap.zeros(3, 2)
        path = tmp_path / "grid.bin"
        save_float_grid(m, path)
        blob = path.read_bytes()
        assert blob[:4] == b"OVCD"
        assert len(blob) == 16 + 4 * 6
        assert int.from_bytes(blob[4:8], "little") == 3
        assert int.from_bytes(blob[8:12], "little") == 2

    def test_float_grid_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + bytes(12) + bytes(4))
        with pytest.raises(ValueError):
            load_float_grid(path)


class TestTypeInvariants:
    def test_image_shape_validation(self):
        with pytest.raises(ValueError):
            RasterImage(np.zeros((4, 4), dtype=np.uint8))

    def test_scalar_map_rejects_nan(self):
        values = np.zeros((2, 2), dtype=np.float32)
        values[0, 0] = np.nan
        with pytest.raises(ValueError):
            ScalarMap(values)
