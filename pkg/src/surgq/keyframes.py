"""Keyframe identification from per-frame feature vectors.

Frames inside a visually consistent span are mutually similar, so the mean
cosine similarity over a sliding window along the frame axis rises inside a
span and dips at transitions. Keyframes are the peaks of that signal.

Only the diagonal band of the pairwise similarity matrix is ever needed:
for unit-normalized vectors the sum of all pairwise dot products inside a
window of size m equals (||S||^2 - m) / 2 where S is the window's vector sum,
so the whole signal costs O(T*D) instead of the O(T^2*D) full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .errors import EmptySeries, InvalidSpec
from .scene import FrameRef

DEFAULT_WINDOW = 15
DEFAULT_MIN_SEPARATION = 10
DEFAULT_MIN_PROMINENCE = 0.01

FEATURE_MAGIC = b"SFV1"


def default_frame_refs(n: int, video_id: str = "", period_ms: int = 1000) -> tuple[FrameRef, ...]:
    """Synthesize refs for a series sampled at a fixed period (default 1 fps)."""
    return tuple(FrameRef(video_id, i, i * period_ms) for i in range(n))


@dataclass(frozen=True)
class FeatureSeries:
    """One feature vector per frame, shape (T, D) float32, no zero rows."""

    vectors: np.ndarray
    frame_refs: tuple[FrameRef, ...] = ()

    def __post_init__(self):
        arr = np.asarray(self.vectors, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise EmptySeries(f"need a (T, D) matrix with T,D >= 1, got {arr.shape}")
        norms = np.linalg.norm(arr.astype(np.float64), axis=1)
        if (norms == 0).any():
            raise EmptySeries(f"zero-norm feature vector at frame {int(np.argmin(norms))}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)
        refs = self.frame_refs or default_frame_refs(arr.shape[0])
        if len(refs) != arr.shape[0]:
            raise EmptySeries(f"{len(refs)} refs for {arr.shape[0]} frames")
        object.__setattr__(self, "frame_refs", tuple(refs))

    @property
    def n_frames(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class SimilaritySignal:
    """Windowed mean pairwise cosine per frame, values in [-1, 1]."""

    values: np.ndarray
    window: int

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)


def banded_similarity_signal(features: FeatureSeries, half_width: int = DEFAULT_WINDOW) -> SimilaritySignal:
    """Mean cosine over all frame pairs within +-half_width of each position.

    Windows truncate at the series boundaries rather than padding. A window
    with fewer than two frames (only possible at T == 1) yields 1.0.
    """
    if half_width < 1:
        raise InvalidSpec(f"half_width must be >= 1, got {half_width}")
    t_total = features.n_frames
    v = features.vectors.astype(np.float64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)

    if t_total == 1:
        return SimilaritySignal(np.ones(1), half_width)

    prefix = np.vstack([np.zeros((1, v.shape[1])), np.cumsum(v, axis=0)])
    lo = np.maximum(np.arange(t_total) - half_width, 0)
    hi = np.minimum(np.arange(t_total) + half_width, t_total - 1)
    window_sum = prefix[hi + 1] - prefix[lo]
    m = (hi - lo + 1).astype(np.float64)
    # sum over i<j of v_i.v_j for unit vectors, then mean over the m*(m-1)/2 pairs
    pair_sum = (np.einsum("ij,ij->i", window_sum, window_sum) - m) / 2.0
    values = pair_sum / (m * (m - 1) / 2.0)
    np.clip(values, -1.0, 1.0, out=values)
    return SimilaritySignal(values, half_width)


def _plateau_maxima(x: np.ndarray) -> list[tuple[int, int, float]]:
    """Local-maximum runs as (left, right, height); plateaus count once.

    A maximal run of equal values is a local maximum when every existing
    neighbor is strictly lower, so runs touching one signal end qualify. A
    run spanning the whole signal (a flat signal) never does - that case is
    the caller's fallback.
    """
    t_total = len(x)
    maxima = []
    i = 0
    while i < t_total:
        j = i
        while j + 1 < t_total and x[j + 1] == x[i]:
            j += 1
        whole = i == 0 and j == t_total - 1
        left_ok = i == 0 or x[i - 1] < x[i]
        right_ok = j == t_total - 1 or x[j + 1] < x[i]
        if not whole and left_ok and right_ok:
            maxima.append((i, j, float(x[i])))
        i = j + 1
    return maxima


def _prominence(x: np.ndarray, left: int, right: int) -> float:
    """Topographic prominence of a local-maximum run.

    Each side is scanned outward from the run's edge until terrain higher
    than the run (or the signal end); the side's base is the minimum over
    that stretch. The higher base wins; a side with no samples beyond the
    run contributes none.
    """
    h = x[left]
    bases = []
    i = left - 1
    if i >= 0:
        m = x[i]
        while i >= 0 and x[i] <= h:
            m = min(m, x[i])
            i -= 1
        bases.append(m)
    i = right + 1
    if i < len(x):
        m = x[i]
        while i < len(x) and x[i] <= h:
            m = min(m, x[i])
            i += 1
        bases.append(m)
    return float(h - max(bases))


def detect_peaks(
    signal: SimilaritySignal,
    min_separation: int = DEFAULT_MIN_SEPARATION,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
) -> list[int]:
    """Qualifying peaks of the signal, ascending, at least min_separation apart.

    When peaks conflict on separation the taller one wins. If nothing
    qualifies, the fallback is the global argmax (lowest index on ties) -
    except for an entirely flat signal, which is one whole-length plateau and
    yields its center floor(T/2).
    """
    if min_separation < 1:
        raise InvalidSpec(f"min_separation must be >= 1, got {min_separation}")
    if min_prominence < 0:
        raise InvalidSpec(f"min_prominence must be >= 0, got {min_prominence}")
    x = np.asarray(signal.values, dtype=np.float64)
    t_total = len(x)

    candidates = [
        ((left + right) // 2, h)
        for left, right, h in _plateau_maxima(x)
        if _prominence(x, left, right) >= min_prominence
    ]
    candidates.sort(key=lambda c: (-c[1], c[0]))
    accepted: list[int] = []
    for idx, _ in candidates:
        if all(abs(idx - a) >= min_separation for a in accepted):
            accepted.append(idx)
    if not accepted:
        if x.max() == x.min():
            return [t_total // 2]
        return [int(np.argmax(x))]
    return sorted(accepted)


def keyframes(
    features: FeatureSeries,
    window: int = DEFAULT_WINDOW,
    min_separation: int = DEFAULT_MIN_SEPARATION,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
) -> list[FrameRef]:
    """Identify keyframes: signal peaks mapped back to frame refs."""
    signal = banded_similarity_signal(features, window)
    idx = detect_peaks(signal, min_separation, min_prominence)
    return [features.frame_refs[i] for i in idx]


class KeyframeDetector(BaseEstimator):
    """Estimator wrapper: fit() computes signal_ and keyframe_indices_."""

    def __init__(
        self,
        window: int = DEFAULT_WINDOW,
        min_separation: int = DEFAULT_MIN_SEPARATION,
        min_prominence: float = DEFAULT_MIN_PROMINENCE,
    ):
        self.window = window
        self.min_separation = min_separation
        self.min_prominence = min_prominence

    def fit(self, X, y=None):
        series = X if isinstance(X, FeatureSeries) else FeatureSeries(np.asarray(X))
        self.signal_ = banded_similarity_signal(series, self.window)
        self.keyframe_indices_ = detect_peaks(
            self.signal_, self.min_separation, self.min_prominence
        )
        self.keyframes_ = [series.frame_refs[i] for i in self.keyframe_indices_]
        return self

    def fit_predict(self, X, y=None) -> list[int]:
        return self.fit(X).keyframe_indices_


# ---------------------------------------------------------------------------
# Feature file: magic "SFV1", u32 T, u32 D (LE), then T*D float32 LE row-major.

def save_features(series: FeatureSeries, path: str | Path) -> None:
    t_total, dim = series.vectors.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(np.array([t_total, dim], dtype="<u4").tobytes())
        fh.write(series.vectors.astype("<f4").tobytes())


def load_features(
    path: str | Path, video_id: str = "", period_ms: int = 1000
) -> FeatureSeries:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise EmptySeries(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
        t_total, dim = np.frombuffer(fh.read(8), dtype="<u4")
        data = np.frombuffer(fh.read(int(t_total) * int(dim) * 4), dtype="<f4")
        if data.size != int(t_total) * int(dim):
            raise EmptySeries(f"{path}: truncated feature payload")
    vectors = data.reshape(int(t_total), int(dim))
    return FeatureSeries(vectors, default_frame_refs(int(t_total), video_id, period_ms))
