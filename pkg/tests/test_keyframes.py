from __future__ import annotations

import math

import numpy as np
import pytest

from surgq.errors import EmptySeries
from surgq.keyframes import (
    FeatureSeries,
    KeyframeDetector,
    SimilaritySignal,
    banded_similarity_signal,
    default_frame_refs,
    detect_peaks,
    keyframes,
    load_features,
    save_features,
)


def naive_signal(vectors, w):
    """Reference oracle: materialize the full pairwise cosine matrix."""
    v = np.asarray(vectors, dtype=np.float64)
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    sim = v @ v.T
    t_total = len(v)
    out = np.empty(t_total)
    for t in range(t_total):
        lo, hi = max(0, t - w), min(t_total - 1, t + w)
        pairs = [(i, j) for i in range(lo, hi + 1) for j in range(lo, hi + 1) if i < j]
        out[t] = np.mean([sim[i, j] for i, j in pairs]) if pairs else 1.0
    return out


def block_series(block_lengths, dim=None):
    """Identical vectors inside a block, orthogonal across blocks."""
    dim = dim or len(block_lengths)
    rows = []
    for b, n in enumerate(block_lengths):
        e = np.zeros(dim, dtype=np.float32)
        e[b] = 1.0
        rows.extend([e] * n)
    return FeatureSeries(np.array(rows, dtype=np.float32))


class TestSignal:
    def test_identical_vectors_give_constant_one(self):
        series = FeatureSeries(np.tile(np.array([[1.0, 2.0, 3.0]], dtype=np.float32), (6, 1)))
        signal = banded_similarity_signal(series, 2)
        assert np.allclose(signal.values, 1.0, atol=1e-12)

    def test_hand_enumerated_three_frames(self):
        # e1, e1, e2 with w=1: value[0]=cos(e1,e1)=1; value[1]=(1+0+0)/3; value[2]=0
        series = FeatureSeries(np.array([[1, 0], [1, 0], [0, 1]], dtype=np.float32))
        signal = banded_similarity_signal(series, 1)
        assert signal.values == pytest.approx([1.0, 1 / 3, 0.0], abs=1e-12)

    def test_single_frame_convention(self):
        series = FeatureSeries(np.array([[3.0, 4.0]], dtype=np.float32))
        assert banded_similarity_signal(series, 1).values.tolist() == [1.0]

    @pytest.mark.parametrize("t_total,w", [(2, 1), (7, 1), (25, 3), (60, 15), (40, 40)])
    def test_matches_full_matrix_reference(self, rng, t_total, w):
        vecs = rng.normal(size=(t_total, 8)).astype(np.float32)
        series = FeatureSeries(vecs)
        got = banded_similarity_signal(series, w).values
        want = naive_signal(series.vectors, w)
        assert np.abs(got - want).max() < 1e-9

    def test_scale_invariance(self, rng):
        vecs = rng.normal(size=(12, 5)).astype(np.float32)
        scaled = vecs * rng.uniform(0.1, 50.0, size=(12, 1)).astype(np.float32)
        a = banded_similarity_signal(FeatureSeries(vecs), 3).values
        b = banded_similarity_signal(FeatureSeries(scaled), 3).values
        assert np.abs(a - b).max() < 1e-6

    def test_values_stay_in_unit_interval(self, rng):
        vecs = rng.normal(size=(50, 4)).astype(np.float32)
        values = banded_similarity_signal(FeatureSeries(vecs), 7).values
        assert values.max() <= 1 + 1e-9
        assert values.min() >= -1 - 1e-9

    def test_zero_norm_vector_rejected(self):
        with pytest.raises(EmptySeries):
            FeatureSeries(np.array([[1, 0], [0, 0]], dtype=np.float32))


class TestDetectPeaks:
    def signal(self, values):
        return SimilaritySignal(np.asarray(values, dtype=np.float64), 1)

    def test_two_clear_peaks(self):
        assert detect_peaks(self.signal([0, 1, 0, 0, 1, 0]), 2, 0.5) == [1, 4]

    def test_constant_signal_falls_back_to_middle(self):
        assert detect_peaks(self.signal([0.5] * 7), 2, 0.01) == [3]
        assert detect_peaks(self.signal([0.5] * 6), 2, 0.01) == [3]

    def test_monotone_increasing_returns_last(self):
        assert detect_peaks(self.signal([0, 1, 2, 3, 4]), 2, 0.01) == [4]

    def test_plateau_yields_center(self):
        assert detect_peaks(self.signal([0, 1, 1, 1, 0]), 1, 0.1) == [2]

    def test_min_separation_keeps_taller(self):
        # peaks at 1 (h=1.0) and 3 (h=0.8) closer than separation: taller wins
        assert detect_peaks(self.signal([0, 1.0, 0.5, 0.8, 0]), 3, 0.01) == [1]

    def test_prominence_filters_shallow_bumps(self):
        # second bump only rises 0.03 above its saddle at 0.45
        values = [0, 0.5, 0.45, 0.48, 0]
        assert detect_peaks(self.signal(values), 1, 0.2) == [1]

    def test_boundary_maximum_is_a_peak(self):
        # spike at the end qualifies directly, not only via fallback
        assert detect_peaks(self.signal([0, 0.2, 0.1, 0.9]), 1, 0.5) == [3]

    def test_count_bound(self, rng):
        values = rng.random(40)
        for sep in (1, 3, 10):
            found = detect_peaks(SimilaritySignal(values, 1), sep, 0.0)
            assert len(found) <= math.ceil(40 / sep)
            assert all(b - a >= sep for a, b in zip(found, found[1:]))


class TestKeyframes:
    def test_block_series_one_keyframe_per_block(self):
        lengths = [20, 20, 20]
        series = block_series(lengths)
        refs = keyframes(series, window=4, min_separation=8, min_prominence=0.05)
        assert len(refs) == 3
        starts = np.cumsum([0] + lengths)
        for ref, (lo, hi) in zip(refs, zip(starts[:-1], starts[1:])):
            assert lo <= ref.frame_index < hi

    def test_single_block(self):
        series = block_series([15])
        refs = keyframes(series, window=3, min_separation=5, min_prominence=0.01)
        assert len(refs) == 1

    def test_two_blocks_centers_within_window(self):
        series = block_series([10, 10])
        refs = keyframes(series, window=2, min_separation=5, min_prominence=0.01)
        assert len(refs) == 2
        assert abs(refs[0].frame_index - 4.5) <= 2 + 0.5
        assert abs(refs[1].frame_index - 14.5) <= 2 + 0.5

    def test_determinism(self, rng):
        vecs = rng.normal(size=(40, 6)).astype(np.float32)
        a = keyframes(FeatureSeries(vecs), 3, 4, 0.01)
        b = keyframes(FeatureSeries(vecs), 3, 4, 0.01)
        assert a == b

    def test_estimator_wrapper(self):
        detector = KeyframeDetector(window=4, min_separation=8, min_prominence=0.05)
        series = block_series([20, 20])
        indices = detector.fit_predict(series)
        assert indices == detector.keyframe_indices_
        assert len(indices) == 2
        assert detector.get_params()["window"] == 4


class TestFeatureFile:
    def test_roundtrip(self, tmp_path, rng):
        vecs = rng.normal(size=(9, 5)).astype(np.float32)
        series = FeatureSeries(vecs, default_frame_refs(9, "vidA", 40))
        path = tmp_path / "f.sfv"
        save_features(series, path)
        loaded = load_features(path, video_id="vidA", period_ms=40)
        assert np.array_equal(loaded.vectors, series.vectors)
        assert loaded.frame_refs == series.frame_refs

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.sfv"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(EmptySeries):
            load_features(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.sfv"
        path.write_bytes(b"SFV1" + np.array([4, 4], dtype="<u4").tobytes() + b"\x00" * 8)
        with pytest.raises(EmptySeries):
            load_features(path)
