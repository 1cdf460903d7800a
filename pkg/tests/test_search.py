from __future__ import annotations

import numpy as np
import pytest

from surgq.corpus import SyntheticSpec, generate_frames
from surgq.errors import (
    DimensionMismatch,
    EmptyCorpus,
    InvalidGrid,
    RaggedJudgments,
)
from surgq.fusion import fuse
from surgq.scene import ClassMap, FrameRef, downsample
from surgq.search import (
    FrameSearchIndex,
    build_index,
    evaluate_a_at_n,
    load_index,
    map_distance,
    rank_all,
    save_index,
    search,
)


def uniform(h, w, value):
    return ClassMap(np.full((h, w), value, dtype=np.int64))


def synthetic_corpus(n, seed=0, w=160, h=90):
    frames, _ = generate_frames(SyntheticSpec(n_frames=n, width=w, height=h, seed=seed))
    return [(f.ref, fuse(f.truth_map, f.truth_sections)) for f in frames]


def brute_force_ranking(index, query):
    """Oracle: score every entry, then sort by (distance, video, index)."""
    scored = []
    for ref, small in index.entries:
        diff = np.count_nonzero(small.labels != query.labels)
        scored.append((ref, (2.0 / 9.0) * diff / small.labels.size))
    scored.sort(key=lambda e: (e[1], e[0].video_id, e[0].frame_index))
    return scored


class TestMapDistance:
    def test_identical_is_zero(self):
        a = uniform(4, 5, 3)
        assert map_distance(a, a) == 0.0

    def test_uniform_class_2_vs_8(self):
        assert map_distance(uniform(3, 3, 2), uniform(3, 3, 8)) == pytest.approx(2 / 9)

    def test_half_differing(self):
        a = np.zeros((2, 4), dtype=np.int64)
        b = a.copy()
        b[:, :2] = 7
        assert map_distance(ClassMap(a), ClassMap(b)) == pytest.approx(1 / 9)

    def test_symmetry_and_range(self, rng):
        for _ in range(20):
            a = ClassMap(rng.integers(0, 9, (6, 7)))
            b = ClassMap(rng.integers(0, 9, (6, 7)))
            d = map_distance(a, b)
            assert d == map_distance(b, a)
            assert 0.0 <= d <= 2 / 9

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            map_distance(uniform(2, 2, 0), uniform(3, 2, 0))


class TestBuildIndex:
    def test_single_frame(self):
        corpus = synthetic_corpus(1)
        index = build_index(corpus, 16, 9)
        assert index.n_frames == 1

    def test_grid_cells(self):
        index = build_index(synthetic_corpus(4), 80, 45)
        assert all(cm.labels.size == 3600 for _, cm in index.entries)

    def test_zero_grid(self):
        with pytest.raises(InvalidGrid):
            build_index(synthetic_corpus(1), 0, 45)

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            build_index([], 8, 8)

    def test_entries_sorted(self):
        corpus = list(reversed(synthetic_corpus(5)))
        index = build_index(corpus, 16, 9)
        keys = [(r.video_id, r.frame_index) for r, _ in index.entries]
        assert keys == sorted(keys)

    def test_save_load_roundtrip(self, tmp_path):
        index = build_index(synthetic_corpus(6), 16, 9)
        path = tmp_path / "index.npz"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.fingerprint == index.fingerprint
        assert loaded.entries == index.entries


class TestSearch:
    def test_ranking_matches_brute_force_exactly(self, rng):
        index = build_index(synthetic_corpus(60, seed=2), 20, 12)
        for seed in range(10):
            q_rng = np.random.default_rng(seed)
            query = ClassMap(q_rng.integers(0, 9, (12, 20)))
            assert rank_all(index, query) == brute_force_ranking(index, query)

    def test_self_retrieval(self):
        corpus = synthetic_corpus(30, seed=4)
        index = build_index(corpus, 20, 12)
        for (ref, scene), (_, small) in zip(corpus, index.entries):
            result = search(index, small, k=1, min_gap_ms=0)
            assert result.ranked[0][0] == ref
            assert result.ranked[0][1] == 0.0

    def test_k_larger_than_corpus(self):
        index = build_index(synthetic_corpus(5), 16, 9)
        result = search(index, index.entries[0][1], k=50, min_gap_ms=0)
        assert len(result.ranked) == 5
        dists = [d for _, d in result.ranked]
        assert dists == sorted(dists)

    def test_nms_suppresses_near_duplicate(self):
        base = uniform(9, 16, 2)
        corpus = [
            (FrameRef("v", 0, 0), base),
            (FrameRef("v", 1, 100), base),  # byte-identical, 100 ms later
            (FrameRef("v", 2, 5000), uniform(9, 16, 4)),
        ]
        index = build_index(corpus, 16, 9)
        result = search(index, base, k=9, min_gap_ms=2000)
        refs = [r for r, _ in result.ranked]
        assert FrameRef("v", 0, 0) in refs
        assert FrameRef("v", 1, 100) not in refs
        assert FrameRef("v", 2, 5000) in refs

    def test_nms_keeps_cross_video_frames(self):
        base = uniform(9, 16, 2)
        corpus = [
            (FrameRef("a", 0, 0), base),
            (FrameRef("b", 0, 0), base),
        ]
        index = build_index(corpus, 16, 9)
        result = search(index, base, k=9, min_gap_ms=2000)
        assert len(result.ranked) == 2

    def test_nms_preserves_rank_order(self, rng):
        index = build_index(synthetic_corpus(40, seed=9), 20, 12)
        query = ClassMap(rng.integers(0, 9, (12, 20)))
        full = rank_all(index, query)
        kept = search(index, query, k=9, min_gap_ms=3000).ranked
        positions = [full.index(entry) for entry in kept]
        assert positions == sorted(positions)

    def test_full_size_reference_is_downsampled(self):
        corpus = synthetic_corpus(8, seed=5)
        index = build_index(corpus, 20, 12)
        ref, scene = corpus[3]
        result = search(index, scene.class_map, k=1, min_gap_ms=0)
        assert result.ranked[0][0] == ref

    def test_estimator_wrapper(self):
        corpus = synthetic_corpus(10, seed=6)
        fsi = FrameSearchIndex(grid_w=20, grid_h=12).fit(corpus)
        result = fsi.query(corpus[0][1].class_map, k=3)
        assert result.ranked[0][0] == corpus[0][0]
        assert fsi.get_params() == {"grid_w": 20, "grid_h": 12}


class TestAAtN:
    def test_paper_scale_fixtures(self):
        # 25 queries x 9 suggestions
        def fixture(relevant_total):
            rows = []
            remaining = relevant_total
            for _ in range(25):
                take = min(9, remaining)
                rows.append([True] * take + [False] * (9 - take))
                remaining -= take
            assert remaining == 0
            return rows

        assert evaluate_a_at_n(fixture(198), 9) == pytest.approx(0.88, abs=1e-4)
        assert evaluate_a_at_n(fixture(70), 9) == pytest.approx(0.3111, abs=1e-4)

    def test_all_relevant(self):
        assert evaluate_a_at_n([[True] * 9] * 4, 9) == 1.0

    def test_ragged_rejected(self):
        with pytest.raises(RaggedJudgments):
            evaluate_a_at_n([[True] * 9, [True] * 8], 9)

    def test_empty_rejected(self):
        with pytest.raises(RaggedJudgments):
            evaluate_a_at_n([], 9)
