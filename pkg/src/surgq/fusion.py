"""Fuses a predicted class map with an independent section mask.

The two inputs disagree in a useful way: the class map carries labels but
bleeds across object boundaries, while the section mask separates objects
cleanly but is unlabeled. Fusion runs in two steps:

1. Every section votes: it is assigned the class held by the majority of its
   pixels (ties broken by lowest class id), which repairs minority label
   errors inside a section.
2. Sections that touch (4-adjacency) and ended up with the same class are
   merged into one section, renumbered in row-major first-occurrence order.

The result is a class-pure scene: each section holds exactly one class and no
two touching sections share a class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import MissingSection
from .scene import (
    N_CLASSES,
    ClassMap,
    FusedScene,
    SectionMask,
    build_section_table,
    validate_pair,
)


@dataclass(frozen=True)
class SectionAssignment:
    """Per-section winning class plus the full vote tallies behind it."""

    classes: np.ndarray  # shape (N,), winning class id per section
    tallies: np.ndarray  # shape (N, 9), pixel votes per section per class

    def __post_init__(self):
        object.__setattr__(self, "classes", np.asarray(self.classes, dtype=np.uint8))
        object.__setattr__(self, "tallies", np.asarray(self.tallies, dtype=np.int64))

    @property
    def n_sections(self) -> int:
        return len(self.classes)

    def class_of(self, section_id: int) -> int:
        if not 0 <= section_id < self.n_sections:
            raise MissingSection(section_id)
        return int(self.classes[section_id])


def vote_section_classes(class_map: ClassMap, section_mask: SectionMask) -> SectionAssignment:
    """Assign each section the class of the majority of its pixels.

    Ties break toward the lowest class id so results are reproducible.
    """
    validate_pair(class_map, section_mask)
    sec = section_mask.sections.ravel().astype(np.int64)
    lab = class_map.labels.ravel().astype(np.int64)
    n = section_mask.n_sections
    tallies = np.bincount(sec * N_CLASSES + lab, minlength=n * N_CLASSES)
    tallies = tallies.reshape(n, N_CLASSES)
    # argmax returns the first (lowest) index among ties
    return SectionAssignment(classes=tallies.argmax(axis=1), tallies=tallies)


def relabel(section_mask: SectionMask, assignment: SectionAssignment) -> ClassMap:
    """Rewrite every pixel to its section's assigned class."""
    n = int(section_mask.sections.max()) + 1
    if assignment.n_sections < n:
        raise MissingSection(assignment.n_sections)
    return ClassMap(assignment.classes[section_mask.sections])


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _adjacent_section_pairs(sections: np.ndarray) -> np.ndarray:
    """Unique unordered pairs of section ids that share a 4-adjacent pixel edge."""
    n = int(sections.max()) + 1
    codes = []
    h_a, h_b = sections[:, :-1], sections[:, 1:]
    v_a, v_b = sections[:-1, :], sections[1:, :]
    for a, b in ((h_a, h_b), (v_a, v_b)):
        diff = a != b
        if diff.any():
            lo = np.minimum(a[diff], b[diff]).astype(np.int64)
            hi = np.maximum(a[diff], b[diff]).astype(np.int64)
            codes.append(lo * n + hi)
    if not codes:
        return np.empty((0, 2), dtype=np.int64)
    uniq = np.unique(np.concatenate(codes))
    return np.stack(np.divmod(uniq, n), axis=1)


def merge_sections(section_mask: SectionMask, assignment: SectionAssignment) -> SectionMask:
    """Merge 4-adjacent sections that carry the same assigned class.

    Survivors are renumbered to contiguous ids in row-major first-occurrence
    order, so the output is deterministic.
    """
    n = section_mask.n_sections
    if assignment.n_sections < n:
        raise MissingSection(assignment.n_sections)
    uf = _UnionFind(n)
    classes = assignment.classes
    for a, b in _adjacent_section_pairs(section_mask.sections):
        if classes[a] == classes[b]:
            uf.union(int(a), int(b))
    roots = np.array([uf.find(i) for i in range(n)], dtype=np.int64)

    flat = roots[section_mask.sections.ravel().astype(np.int64)]
    # renumber roots by first occurrence in row-major order, without sorting
    # the full grid: a reversed scatter records each root's first position
    first = np.full(n, -1, dtype=np.int64)
    first[flat[::-1]] = np.arange(flat.size - 1, -1, -1)
    present = np.flatnonzero(first >= 0)
    order = present[np.argsort(first[present])]
    remap = np.empty(n, dtype=np.int64)
    remap[order] = np.arange(len(order))
    merged = remap[flat].reshape(section_mask.sections.shape)
    return SectionMask(merged)


def fuse(class_map: ClassMap, section_mask: SectionMask) -> FusedScene:
    """Run both fusion steps and return the consistent scene."""
    validate_pair(class_map, section_mask)
    assignment = vote_section_classes(class_map, section_mask)
    fused_map = relabel(section_mask, assignment)
    merged = merge_sections(section_mask, assignment)
    table = build_section_table(fused_map, merged)
    return FusedScene(class_map=fused_map, section_mask=merged, section_table=table)


class SceneFuser(BaseEstimator, TransformerMixin):
    """Stateless transformer applying `fuse` to (class_map, section_mask) pairs.

    Exists so fusion slots into estimator pipelines; `transform` accepts a
    sequence of pairs and returns a list of FusedScene.
    """

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[FusedScene]:
        return [fuse(class_map, section_mask) for class_map, section_mask in X]
