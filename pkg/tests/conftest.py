from __future__ import annotations

import numpy as np
import pytest

from surgq.corpus import SyntheticSpec, generate_frames
from surgq.scene import ClassMap, SectionMask


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_scene_spec(n_frames=1, noise=0.0, seed=0, width=64, height=48):
    return SyntheticSpec(n_frames=n_frames, width=width, height=height, noise=noise, seed=seed)


@pytest.fixture
def synthetic_frame():
    frames, _ = generate_frames(small_scene_spec(seed=7))
    return frames[0]


def checkerboard(h, w, a=0, b=1):
    grid = np.fromfunction(lambda y, x: (x + y) % 2, (h, w)).astype(np.int64)
    return ClassMap(np.where(grid == 0, a, b))


def all_components_at_least(labels: np.ndarray, min_frac: float) -> bool:
    """True when every non-background connected component covers >= min_frac."""
    from scipy import ndimage

    floor = min_frac * labels.size
    for value in np.unique(labels):
        if value == 0:
            continue
        comp, n = ndimage.label(labels == value)
        sizes = np.bincount(comp.ravel())[1:]
        if (sizes < floor).any():
            return False
    return True


def scenes_with_large_components(n_scenes, min_frac=0.01, width=160, height=120, start_seed=0):
    """First n generated scenes whose components all clear the size floor."""
    from surgq.corpus import SyntheticSpec, generate_frames

    out = []
    seed = start_seed
    while len(out) < n_scenes:
        frames, _ = generate_frames(
            SyntheticSpec(n_frames=1, width=width, height=height, noise=0.0, seed=seed)
        )
        if all_components_at_least(frames[0].truth_map.labels, min_frac):
            out.append(frames[0])
        seed += 1
    return out


def split_map(h, w, left, right):
    arr = np.full((h, w), left, dtype=np.int64)
    arr[:, w // 2 :] = right
    return ClassMap(arr)


def split_sections(h, w):
    arr = np.zeros((h, w), dtype=np.int64)
    arr[:, w // 2 :] = 1
    return SectionMask(arr)
