from __future__ import annotations

import numpy as np
import pytest

from surgq.corpus import SyntheticSpec, generate_frames
from surgq.errors import MissingSection
from surgq.fusion import (
    SceneFuser,
    fuse,
    merge_sections,
    relabel,
    vote_section_classes,
)
from surgq.scene import ClassMap, SectionMask

from conftest import split_map, split_sections


def hand_tallies(labels, sections, n_sections):
    """Independent tally oracle: plain dict counting."""
    tallies = np.zeros((n_sections, 9), dtype=np.int64)
    for lab, sec in zip(np.asarray(labels).ravel(), np.asarray(sections).ravel()):
        tallies[sec, lab] += 1
    return tallies


class TestVoting:
    def test_majority_wins(self):
        # one section of 10 pixels: 7 Liver(2), 3 Fat(4)
        labels = np.array([[2, 2, 2, 2, 2], [2, 2, 4, 4, 4]])
        cm = ClassMap(labels)
        sm = SectionMask(np.zeros((2, 5), dtype=np.int64))
        assignment = vote_section_classes(cm, sm)
        assert assignment.class_of(0) == 2
        assert np.array_equal(assignment.tallies, hand_tallies(labels, sm.sections, 1))

    def test_unanimous(self):
        cm = ClassMap(np.full((3, 3), 8, dtype=np.int64))
        sm = SectionMask(np.zeros((3, 3), dtype=np.int64))
        assert vote_section_classes(cm, sm).class_of(0) == 8

    def test_tie_breaks_to_lowest_class_id(self):
        labels = np.array([[3, 3, 3, 4, 4], [4, 4, 3, 3, 4]])  # 5 vs 5
        cm = ClassMap(labels)
        sm = SectionMask(np.zeros((2, 5), dtype=np.int64))
        assignment = vote_section_classes(cm, sm)
        tallies = hand_tallies(labels, sm.sections, 1)
        assert tallies[0, 3] == tallies[0, 4] == 5
        assert assignment.class_of(0) == 3

    def test_winner_tally_is_maximal(self, rng):
        labels = rng.integers(0, 9, size=(16, 16))
        sections = rng.integers(0, 4, size=(16, 16))
        # make ids contiguous
        sections.flat[:4] = [0, 1, 2, 3]
        assignment = vote_section_classes(ClassMap(labels), SectionMask(sections))
        for i in range(assignment.n_sections):
            winner = assignment.class_of(i)
            assert assignment.tallies[i, winner] == assignment.tallies[i].max()


class TestRelabel:
    def test_single_section(self):
        sm = SectionMask(np.zeros((2, 3), dtype=np.int64))
        cm = ClassMap(np.full((2, 3), 6, dtype=np.int64))
        assignment = vote_section_classes(cm, sm)
        assert np.array_equal(relabel(sm, assignment).labels, cm.labels)

    def test_two_sections_per_pixel_lookup(self):
        sm = split_sections(4, 6)
        cm = split_map(4, 6, 2, 8)
        out = relabel(sm, vote_section_classes(cm, sm))
        assert out == cm

    def test_missing_section(self):
        sm = SectionMask(np.array([[0, 1]], dtype=np.int64))
        incomplete = vote_section_classes(
            ClassMap(np.array([[5]], dtype=np.int64)),
            SectionMask(np.array([[0]], dtype=np.int64)),
        )
        with pytest.raises(MissingSection):
            relabel(sm, incomplete)


def brute_adjacent_pairs(sections):
    """Oracle: exhaustive pixel scan for 4-adjacent section pairs."""
    h, w = sections.shape
    pairs = set()
    for y in range(h):
        for x in range(w):
            for dy, dx in ((0, 1), (1, 0)):
                ny, nx = y + dy, x + dx
                if ny < h and nx < w and sections[y, x] != sections[ny, nx]:
                    pairs.add(tuple(sorted((int(sections[y, x]), int(sections[ny, nx])))))
    return pairs


class TestMergeSections:
    def test_touching_same_class_merge(self):
        sm = split_sections(4, 6)
        cm = split_map(4, 6, 3, 3)
        merged = merge_sections(sm, vote_section_classes(cm, sm))
        assert merged.n_sections == 1

    def test_touching_different_classes_stay(self):
        sm = split_sections(4, 6)
        cm = split_map(4, 6, 2, 4)
        merged = merge_sections(sm, vote_section_classes(cm, sm))
        assert merged.n_sections == 2

    def test_separated_same_class_stay(self):
        # two class-5 sections separated by a one-pixel class-0 band
        labels = np.array([[5, 0, 5]] * 3, dtype=np.int64)
        sections = np.array([[0, 1, 2]] * 3, dtype=np.int64)
        cm, sm = ClassMap(labels), SectionMask(sections)
        merged = merge_sections(sm, vote_section_classes(cm, sm))
        assert merged.n_sections == 3
        assert brute_adjacent_pairs(sections) == {(0, 1), (1, 2)}

    def test_renumbering_is_row_major_first_occurrence(self):
        # sections 0 and 2 share a class and touch; survivor order follows
        # first pixel in row-major scan
        labels = np.array([[1, 1, 4], [1, 1, 4]], dtype=np.int64)
        sections = np.array([[0, 2, 1], [2, 0, 1]], dtype=np.int64)
        merged = merge_sections(
            SectionMask(sections), vote_section_classes(ClassMap(labels), SectionMask(sections))
        )
        assert merged.sections.tolist() == [[0, 0, 1], [0, 0, 1]]


class TestFuse:
    def test_pure_input_class_map_unchanged(self):
        cm = split_map(4, 6, 2, 8)
        sm = split_sections(4, 6)
        fused = fuse(cm, sm)
        assert fused.class_map == cm

    def test_minority_error_repaired(self):
        # section mostly G.I. Tract with a minority mislabeled as Liver
        labels = np.full((4, 5), 3, dtype=np.int64)
        labels[0, 0] = 2
        labels[1, 1] = 2
        fused = fuse(ClassMap(labels), SectionMask(np.zeros((4, 5), dtype=np.int64)))
        assert (fused.class_map.labels == 3).all()

    def test_synthetic_noise_recovered_exactly(self):
        frames, _ = generate_frames(
            SyntheticSpec(n_frames=3, width=80, height=60, noise=0.45, seed=5)
        )
        for frame in frames:
            fused = fuse(frame.noisy_map, frame.truth_sections)
            assert fused.class_map == frame.truth_map

    def test_pixel_count_conservation(self, synthetic_frame):
        fused = fuse(synthetic_frame.noisy_map, synthetic_frame.truth_sections)
        total = sum(rec.pixel_count for rec in fused.section_table)
        assert total == fused.width * fused.height

    def test_idempotence_and_purity(self):
        frames, _ = generate_frames(
            SyntheticSpec(n_frames=5, width=64, height=48, noise=0.3, seed=11)
        )
        for frame in frames:
            fused = fuse(frame.noisy_map, frame.truth_sections)
            # purity: every section holds exactly one class
            sec = fused.section_mask.sections.ravel()
            lab = fused.class_map.labels.ravel()
            for s in range(fused.section_mask.n_sections):
                assert len(np.unique(lab[sec == s])) == 1
            # no same-class adjacent pair survives
            classes = {rec.section_id: rec.class_id for rec in fused.section_table}
            for a, b in brute_adjacent_pairs(fused.section_mask.sections):
                assert classes[a] != classes[b]
            again = fuse(fused.class_map, fused.section_mask)
            assert again.class_map == fused.class_map

    def test_scene_fuser_estimator(self):
        cm = split_map(4, 6, 2, 8)
        sm = split_sections(4, 6)
        fuser = SceneFuser()
        out = fuser.fit_transform([(cm, sm)])
        assert out[0].class_map == cm
        assert fuser.get_params() == {}
