"""Search-by-mask engine: rank frames by segmentation-map similarity.

Every fused frame is reduced to a small fixed-grid class map. A query (an
edited polygon scene, or a class map) is reduced to the same grid and scored
against every frame with the mean squared error of the one-hot class
encodings, which collapses to (2/9) * fraction-of-differing-cells. The scan
is exhaustive and exact; a temporal non-max suppression pass keeps the top-k
from being filled with near-duplicate neighboring frames.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .errors import (
    DimensionMismatch,
    EmptyCorpus,
    EmptyIndex,
    GridMismatch,
    InvalidGrid,
    RaggedJudgments,
)
from .geometry import PolygonScene, rasterize
from .scene import N_CLASSES, ClassMap, FrameRef, FusedScene, downsample

DEFAULT_GRID_W = 80
DEFAULT_GRID_H = 45
DEFAULT_K = 9
DEFAULT_MIN_GAP_MS = 2000

# Maximum one-hot MSE: two cells that disagree contribute 2 over 9 channels.
MAX_DISTANCE = 2.0 / N_CLASSES


def map_distance(a: ClassMap, b: ClassMap) -> float:
    """One-hot-channel MSE between two class maps; (2/9) * differing fraction."""
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatch(
            f"cannot compare {a.width}x{a.height} with {b.width}x{b.height}"
        )
    differing = np.count_nonzero(a.labels != b.labels)
    return MAX_DISTANCE * differing / a.labels.size


@dataclass(frozen=True)
class FrameIndex:
    """Downsampled class maps for a corpus, sorted by (video_id, frame_index)."""

    grid_w: int
    grid_h: int
    entries: tuple[tuple[FrameRef, ClassMap], ...]
    fingerprint: str

    @property
    def n_frames(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SearchResult:
    """Ranked (frame, distance) pairs, distances non-decreasing."""

    ranked: tuple[tuple[FrameRef, float], ...]
    query_grid: tuple[int, int]


def build_index(
    corpus: Iterable[tuple[FrameRef, FusedScene | ClassMap]],
    grid_w: int = DEFAULT_GRID_W,
    grid_h: int = DEFAULT_GRID_H,
) -> FrameIndex:
    """Downsample every frame's class map to the index grid."""
    if grid_w < 1 or grid_h < 1:
        raise InvalidGrid(f"grid {grid_w}x{grid_h}")
    entries = []
    digest = hashlib.sha256(f"{grid_w}x{grid_h}".encode())
    for ref, scene in sorted(corpus, key=lambda e: (e[0].video_id, e[0].frame_index)):
        class_map = scene.class_map if isinstance(scene, FusedScene) else scene
        small = downsample(class_map, grid_w, grid_h)
        digest.update(ref.frame_id.encode())
        digest.update(small.labels.tobytes())
        entries.append((ref, small))
    if not entries:
        raise EmptyCorpus("cannot index an empty corpus")
    return FrameIndex(grid_w, grid_h, tuple(entries), digest.hexdigest())


def _reference_grid_map(index: FrameIndex, reference: ClassMap | PolygonScene) -> ClassMap:
    if isinstance(reference, PolygonScene):
        reference = rasterize(reference)
    if (reference.height, reference.width) == (index.grid_h, index.grid_w):
        return reference
    try:
        return downsample(reference, index.grid_w, index.grid_h)
    except InvalidGrid as exc:
        raise GridMismatch(str(exc)) from exc


def rank_all(index: FrameIndex, reference: ClassMap | PolygonScene) -> list[tuple[FrameRef, float]]:
    """Every frame scored against the reference, best first, pre-suppression.

    Ties order by (video_id, frame_index); this ranking is the exhaustive
    brute-force ordering by construction.
    """
    if index.n_frames == 0:
        raise EmptyIndex("index holds no frames")
    query = _reference_grid_map(index, reference)
    scored = [(ref, map_distance(small, query)) for ref, small in index.entries]
    scored.sort(key=lambda e: (e[1], e[0].video_id, e[0].frame_index))
    return scored


def search(
    index: FrameIndex,
    reference: ClassMap | PolygonScene,
    k: int = DEFAULT_K,
    min_gap_ms: int = DEFAULT_MIN_GAP_MS,
) -> SearchResult:
    """Top-k frames by map distance with temporal non-max suppression.

    Walking the exact ranking best-first, a frame is suppressed when a
    better-ranked kept frame from the same video lies within min_gap_ms.
    """
    if k < 1:
        raise InvalidGrid(f"k must be >= 1, got {k}")
    ranked = rank_all(index, reference)
    kept: list[tuple[FrameRef, float]] = []
    for ref, dist in ranked:
        if len(kept) == k:
            break
        if any(
            other.video_id == ref.video_id
            and abs(other.timestamp_ms - ref.timestamp_ms) < min_gap_ms
            for other, _ in kept
        ):
            continue
        kept.append((ref, dist))
    return SearchResult(tuple(kept), (index.grid_w, index.grid_h))


def evaluate_a_at_n(judgments: Sequence[Sequence[bool]], n: int) -> float:
    """Top-n suggestion accuracy: relevant suggestions over all suggestions.

    Every query must contribute exactly n boolean judgments.
    """
    if not judgments:
        raise RaggedJudgments("no queries")
    for q, row in enumerate(judgments):
        if len(row) != n:
            raise RaggedJudgments(f"query {q} has {len(row)} judgments, expected {n}")
    relevant = sum(sum(bool(b) for b in row) for row in judgments)
    return relevant / (n * len(judgments))


def save_index(index: FrameIndex, path) -> None:
    """Persist an index as a compressed npz bundle."""
    refs = index.entries
    np.savez_compressed(
        path,
        grid=np.array([index.grid_w, index.grid_h], dtype=np.int64),
        maps=np.stack([cm.labels for _, cm in refs]),
        videos=np.array([r.video_id for r, _ in refs]),
        indices=np.array([r.frame_index for r, _ in refs], dtype=np.int64),
        timestamps=np.array([r.timestamp_ms for r, _ in refs], dtype=np.int64),
        fingerprint=np.array(index.fingerprint),
    )


def load_index(path) -> FrameIndex:
    with np.load(path, allow_pickle=False) as data:
        grid_w, grid_h = (int(v) for v in data["grid"])
        maps = data["maps"]
        entries = tuple(
            (
                FrameRef(str(v), int(i), int(t)),
                ClassMap(maps[n]),
            )
            for n, (v, i, t) in enumerate(
                zip(data["videos"], data["indices"], data["timestamps"])
            )
        )
        return FrameIndex(grid_w, grid_h, entries, str(data["fingerprint"]))


class FrameSearchIndex(BaseEstimator):
    """Estimator wrapper: fit() builds the index, query() searches it."""

    def __init__(self, grid_w: int = DEFAULT_GRID_W, grid_h: int = DEFAULT_GRID_H):
        self.grid_w = grid_w
        self.grid_h = grid_h

    def fit(self, X: Iterable[tuple[FrameRef, FusedScene | ClassMap]], y=None):
        self.index_ = build_index(X, self.grid_w, self.grid_h)
        return self

    def query(
        self,
        reference: ClassMap | PolygonScene,
        k: int = DEFAULT_K,
        min_gap_ms: int = DEFAULT_MIN_GAP_MS,
    ) -> SearchResult:
        return search(self.index_, reference, k, min_gap_ms)
