from __future__ import annotations

import numpy as np
import pytest

from surgq.errors import (
    DimensionMismatch,
    InvalidClassId,
    InvalidGrid,
    NonContiguousSectionIds,
)
from surgq.scene import (
    ClassMap,
    FrameRef,
    SectionMask,
    class_histogram,
    downsample,
    load_class_map,
    load_section_mask,
    save_class_map,
    save_section_mask,
    validate_pair,
)


class TestValidatePair:
    def test_identity_case(self):
        cm = ClassMap(np.zeros((2, 2), dtype=np.int64))
        sm = SectionMask(np.zeros((2, 2), dtype=np.int64))
        assert validate_pair(cm, sm) == (cm, sm)

    def test_dimension_mismatch(self):
        cm = ClassMap(np.zeros((2, 2), dtype=np.int64))
        sm = SectionMask(np.zeros((2, 3), dtype=np.int64))
        with pytest.raises(DimensionMismatch):
            validate_pair(cm, sm)

    def test_class_id_nine_rejected(self):
        with pytest.raises(InvalidClassId) as exc:
            ClassMap(np.array([[0, 9]], dtype=np.int64))
        assert exc.value.value == 9
        assert exc.value.position == (1, 0)

    def test_negative_class_rejected(self):
        with pytest.raises(InvalidClassId):
            ClassMap(np.array([[-1]], dtype=np.int64))

    def test_noncontiguous_sections_rejected(self):
        with pytest.raises(NonContiguousSectionIds):
            SectionMask(np.array([[0, 2]], dtype=np.int64))  # id 1 unused

    def test_empty_grid_rejected(self):
        with pytest.raises(InvalidGrid):
            ClassMap(np.zeros((0, 3), dtype=np.int64))


class TestDownsample:
    def test_uniform_to_single_cell(self):
        cm = ClassMap(np.full((2, 2), 4, dtype=np.int64))
        out = downsample(cm, 1, 1)
        assert out.labels.tolist() == [[4]]

    def test_center_sample_rule_hand_traced(self):
        # 4x4, left half class 2, right half class 8, grid 2x1:
        # cell (0,0) samples x=floor(0.5*4/2)=1 -> 2; cell (1,0) samples x=3 -> 8
        arr = np.full((4, 4), 2, dtype=np.int64)
        arr[:, 2:] = 8
        out = downsample(ClassMap(arr), 2, 1)
        assert out.labels.tolist() == [[2, 8]]

    def test_grid_larger_than_source(self):
        cm = ClassMap(np.zeros((2, 2), dtype=np.int64))
        with pytest.raises(InvalidGrid):
            downsample(cm, 3, 2)

    def test_zero_grid(self):
        cm = ClassMap(np.zeros((2, 2), dtype=np.int64))
        with pytest.raises(InvalidGrid):
            downsample(cm, 0, 2)

    def test_identity_when_grid_equals_source(self, rng):
        arr = rng.integers(0, 9, size=(13, 17))
        cm = ClassMap(arr)
        assert downsample(cm, 17, 13) == cm

    def test_downsample_only_keeps_present_classes(self, rng):
        arr = rng.choice([0, 2, 5], size=(24, 30))
        out = downsample(ClassMap(arr), 7, 5)
        present = set(np.unique(arr))
        assert set(np.unique(out.labels)) <= present


class TestClassHistogram:
    def test_all_background(self):
        counts = class_histogram(ClassMap(np.zeros((2, 2), dtype=np.int64)))
        assert counts.tolist() == [4, 0, 0, 0, 0, 0, 0, 0, 0]

    def test_direct_count(self):
        counts = class_histogram(ClassMap(np.array([[2, 2, 5]], dtype=np.int64)))
        assert counts[2] == 2
        assert counts[5] == 1

    def test_counts_sum_to_pixel_count(self, rng):
        arr = rng.integers(0, 9, size=(2, 2))
        assert class_histogram(ClassMap(arr)).sum() == 4


class TestFileRoundTrip:
    def test_class_map_roundtrip(self, tmp_path, rng):
        cm = ClassMap(rng.integers(0, 9, size=(20, 31)))
        path = tmp_path / "cm.png"
        save_class_map(cm, path)
        assert load_class_map(path) == cm

    def test_section_mask_roundtrip_above_255_ids(self, tmp_path):
        # 16-bit payload: 300 distinct section ids
        arr = np.arange(300, dtype=np.int64).reshape(15, 20)
        sm = SectionMask(arr)
        path = tmp_path / "sm.png"
        save_section_mask(sm, path)
        loaded = load_section_mask(path)
        assert loaded == sm
        assert loaded.n_sections == 300

    def test_loading_out_of_range_class_rejected(self, tmp_path):
        from PIL import Image

        path = tmp_path / "bad.png"
        Image.fromarray(np.array([[0, 9]], dtype=np.uint8), mode="L").save(path)
        with pytest.raises(InvalidClassId):
            load_class_map(path)


class TestFrameRef:
    def test_id_roundtrip(self):
        ref = FrameRef("vid01", 123, 123000)
        assert FrameRef.parse_id(ref.frame_id) == ("vid01", 123)

    def test_ordering_by_video_then_index(self):
        a = FrameRef("a", 5, 5000)
        b = FrameRef("b", 1, 1000)
        assert a < b
        assert FrameRef("a", 1, 0) < a
