"""Core value types for labeled surgical scenes.

A scene is described by two aligned per-pixel grids: a class map assigning
each pixel one of nine fixed categories, and a section mask partitioning the
frame into N contiguous-id regions. Both are stored as immutable row-major
numpy grids (uint8 for classes, uint16 for sections) and round-trip through
single-channel PNG files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatch,
    InvalidClassId,
    InvalidGrid,
    NonContiguousSectionIds,
)

N_CLASSES = 9

CLASS_NAMES = (
    "Background",
    "Abdominal Wall",
    "Liver",
    "Gastrointestinal Tract",
    "Fat",
    "Tool",
    "Blood",
    "Connected Tissue",
    "Gallbladder",
)

BACKGROUND = 0
ABDOMINAL_WALL = 1
LIVER = 2
GI_TRACT = 3
FAT = 4
TOOL = 5
BLOOD = 6
CONNECTED_TISSUE = 7
GALLBLADDER = 8

# Render palette for overlays. Display-only constant, not a contract.
CLASS_PALETTE = (
    (0, 0, 0),        # Background
    (128, 96, 64),    # Abdominal Wall
    (170, 60, 40),    # Liver
    (220, 170, 60),   # Gastrointestinal Tract
    (240, 220, 130),  # Fat
    (90, 200, 220),   # Tool
    (200, 30, 30),    # Blood
    (200, 140, 180),  # Connected Tissue
    (80, 170, 80),    # Gallbladder
)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ClassMap:
    """Per-pixel category labels, shape (height, width), values in 0..8."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidGrid(f"class map must be a 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            bad = (arr < 0) | (arr > N_CLASSES - 1)
            if bad.any():
                pos = np.argwhere(bad)[0]
                raise InvalidClassId(int(arr[tuple(pos)]), (int(pos[1]), int(pos[0])))
            arr = arr.astype(np.uint8)
        else:
            bad = arr > N_CLASSES - 1
            if bad.any():
                pos = np.argwhere(bad)[0]
                raise InvalidClassId(int(arr[tuple(pos)]), (int(pos[1]), int(pos[0])))
        object.__setattr__(self, "labels", _freeze(arr))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, ClassMap) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash((self.labels.shape, self.labels.tobytes()))


@dataclass(frozen=True)
class SectionMask:
    """Per-pixel section ids, shape (height, width), ids contiguous in 0..N-1."""

    sections: np.ndarray
    n_sections: int = field(default=0)

    def __post_init__(self):
        arr = np.asarray(self.sections)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidGrid(f"section mask must be a 2-D grid, got shape {arr.shape}")
        if np.issubdtype(arr.dtype, np.signedinteger) and (arr < 0).any():
            raise NonContiguousSectionIds("negative section id")
        present = np.unique(arr)
        n = int(present[-1]) + 1
        if len(present) != n:
            raise NonContiguousSectionIds(
                f"section ids must cover 0..{n - 1}; {n - len(present)} id(s) unused"
            )
        if self.n_sections and self.n_sections != n:
            raise NonContiguousSectionIds(
                f"declared {self.n_sections} sections, grid holds {n}"
            )
        object.__setattr__(self, "sections", _freeze(arr.astype(np.uint16)))
        object.__setattr__(self, "n_sections", n)

    @property
    def width(self) -> int:
        return self.sections.shape[1]

    @property
    def height(self) -> int:
        return self.sections.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, SectionMask) and np.array_equal(
            self.sections, other.sections
        )

    def __hash__(self):
        return hash((self.sections.shape, self.sections.tobytes()))


@dataclass(frozen=True)
class SectionRecord:
    """Summary of one section: its class, size, and bounding box (x0, y0, x1, y1 inclusive)."""

    section_id: int
    class_id: int
    pixel_count: int
    bbox: tuple[int, int, int, int]


@dataclass(frozen=True)
class FusedScene:
    """A class map and section mask that agree: every section is class-pure."""

    class_map: ClassMap
    section_mask: SectionMask
    section_table: tuple[SectionRecord, ...]

    @property
    def width(self) -> int:
        return self.class_map.width

    @property
    def height(self) -> int:
        return self.class_map.height


@dataclass(frozen=True, order=True)
class FrameRef:
    """Reference to one extracted still frame of a source video."""

    video_id: str
    frame_index: int
    timestamp_ms: int

    @property
    def frame_id(self) -> str:
        return f"{self.video_id}:{self.frame_index:06d}"

    @staticmethod
    def parse_id(frame_id: str) -> tuple[str, int]:
        video_id, _, idx = frame_id.rpartition(":")
        return video_id, int(idx)


def validate_pair(class_map: ClassMap, section_mask: SectionMask) -> tuple[ClassMap, SectionMask]:
    """Check that a class map and section mask describe the same frame.

    Grid-level invariants are enforced by the constructors; this adds the
    cross-check that both grids share dimensions.
    """
    if (class_map.height, class_map.width) != (section_mask.height, section_mask.width):
        raise DimensionMismatch(
            f"class map is {class_map.width}x{class_map.height}, "
            f"section mask is {section_mask.width}x{section_mask.height}"
        )
    return class_map, section_mask


def downsample(class_map: ClassMap, grid_w: int, grid_h: int) -> ClassMap:
    """Reduce a class map to a grid_w x grid_h grid by center sampling.

    Output cell (i, j) takes the label of the source pixel at
    (floor((i + 0.5) * width / grid_w), floor((j + 0.5) * height / grid_h)).
    Deterministic, and the identity when the grid equals the source size.
    """
    w, h = class_map.width, class_map.height
    if grid_w < 1 or grid_h < 1:
        raise InvalidGrid(f"grid {grid_w}x{grid_h} has a zero dimension")
    if grid_w > w or grid_h > h:
        raise InvalidGrid(f"grid {grid_w}x{grid_h} exceeds source {w}x{h}")
    xs = ((np.arange(grid_w) + 0.5) * w / grid_w).astype(np.int64)
    ys = ((np.arange(grid_h) + 0.5) * h / grid_h).astype(np.int64)
    return ClassMap(class_map.labels[np.ix_(ys, xs)])


def class_histogram(class_map: ClassMap) -> np.ndarray:
    """Count pixels per class; always returns 9 counts summing to w*h."""
    return np.bincount(class_map.labels.ravel(), minlength=N_CLASSES)


def build_section_table(class_map: ClassMap, section_mask: SectionMask) -> tuple[SectionRecord, ...]:
    """Summarize a class-pure (class map, section mask) pair per section.

    Requires the pair to be validated and each section to hold a single class.
    """
    validate_pair(class_map, section_mask)
    sections = section_mask.sections
    labels = class_map.labels
    n = section_mask.n_sections
    flat_sec = sections.ravel().astype(np.int64)
    counts = np.bincount(flat_sec, minlength=n)

    # Class per section: the label at each section's first pixel, then a
    # purity audit over the whole grid. First occurrence per id without a
    # sort: reversed scatter keeps the smallest position.
    first = np.empty(n, dtype=np.int64)
    first[flat_sec[::-1]] = np.arange(flat_sec.size - 1, -1, -1)
    sec_class = labels.ravel()[first]
    if not np.array_equal(sec_class[flat_sec], labels.ravel()):
        raise DimensionMismatch("sections are not class-pure; fuse the pair first")

    h, w = sections.shape
    ys, xs = np.divmod(np.arange(h * w, dtype=np.int64), w)
    x0 = np.full(n, w, dtype=np.int64)
    y0 = np.full(n, h, dtype=np.int64)
    x1 = np.full(n, -1, dtype=np.int64)
    y1 = np.full(n, -1, dtype=np.int64)
    np.minimum.at(x0, flat_sec, xs)
    np.minimum.at(y0, flat_sec, ys)
    np.maximum.at(x1, flat_sec, xs)
    np.maximum.at(y1, flat_sec, ys)

    return tuple(
        SectionRecord(
            section_id=i,
            class_id=int(sec_class[i]),
            pixel_count=int(counts[i]),
            bbox=(int(x0[i]), int(y0[i]), int(x1[i]), int(y1[i])),
        )
        for i in range(n)
    )


# ---------------------------------------------------------------------------
# File formats: 8-bit single-channel PNG for class maps, 16-bit for sections.

def save_class_map(class_map: ClassMap, path: str | Path) -> None:
    Image.fromarray(class_map.labels, mode="L").save(path, format="PNG")


def load_class_map(path: str | Path) -> ClassMap:
    arr = np.array(Image.open(path))
    if arr.ndim != 2:
        raise InvalidGrid(f"{path}: expected single-channel PNG, got shape {arr.shape}")
    return ClassMap(arr.astype(np.int64))


def save_section_mask(mask: SectionMask, path: str | Path) -> None:
    Image.fromarray(mask.sections.astype(np.uint16)).save(path, format="PNG")


def load_section_mask(path: str | Path) -> SectionMask:
    arr = np.array(Image.open(path))
    if arr.ndim != 2:
        raise InvalidGrid(f"{path}: expected single-channel PNG, got shape {arr.shape}")
    return SectionMask(arr.astype(np.int64))


def render_overlay(class_map: ClassMap) -> np.ndarray:
    """Render a class map to an RGB uint8 image using the fixed palette."""
    palette = np.array(CLASS_PALETTE, dtype=np.uint8)
    return palette[class_map.labels]
