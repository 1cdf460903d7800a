from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surgq.errors import (
    BackendUnavailable,
    DanglingFrameRef,
    DanglingSection,
    EmptyCorrectSet,
    InvalidSpec,
    PathTooShort,
    UnknownOption,
)
from surgq.quiz import (
    DrawPathQuestion,
    ExtractComponentQuestion,
    LocalDiffusionBackend,
    McqOption,
    McqQuestion,
    Quiz,
    RegionFeedback,
    discrete_frechet,
    grade_mcq,
    grade_path,
    inpaint,
    path_distance,
    quiz_from_dict,
    quiz_to_dict,
    render_highlight,
    resample_path,
    ring_region_mask,
    validate_question,
)


class StubProject:
    """Minimal ProjectAssets stand-in."""

    def __init__(self, frames=("v:000001",), sections=5, assets=("pic.png",), canvas=(100, 80)):
        self.frames = set(frames)
        self.sections = sections
        self.assets = set(assets)
        self.canvas = canvas

    def has_frame(self, frame_id):
        return frame_id in self.frames

    def n_sections(self, frame_id):
        return self.sections

    def has_asset(self, name):
        return name in self.assets

    def canvas_size(self):
        return self.canvas


def mcq(correct=frozenset({1}), n_options=4):
    return McqQuestion(
        stem_text="When is exposure sufficient?",
        options=tuple(McqOption(text=f"option {i}") for i in range(n_options)),
        correct=correct,
    )


def frechet_oracle(a, b):
    """Plain recursive discrete Fréchet for cross-checking."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    @lru_cache(maxsize=None)
    def c(i, j):
        d = float(np.linalg.norm(a[i] - b[j]))
        if i == 0 and j == 0:
            return d
        if i == 0:
            return max(c(0, j - 1), d)
        if j == 0:
            return max(c(i - 1, 0), d)
        return max(min(c(i - 1, j), c(i - 1, j - 1), c(i, j - 1)), d)

    return c(len(a) - 1, len(b) - 1)


class TestValidation:
    def test_valid_mcq(self):
        q = mcq()
        assert validate_question(q, StubProject()) is q

    def test_mcq_needs_two_options(self):
        with pytest.raises(InvalidSpec):
            mcq(correct=frozenset({0}), n_options=1)

    def test_empty_correct_set(self):
        with pytest.raises(EmptyCorrectSet):
            mcq(correct=frozenset())

    def test_dangling_section_in_extract(self):
        q = ExtractComponentQuestion(
            frame_id="v:000001",
            removed_section=99,
            inpainted_asset="pic.png",
            prompt="which tool?",
            accepted_tools=frozenset({5}),
            placement_ring=((10, 10), (30, 10), (30, 30)),
        )
        with pytest.raises(DanglingSection):
            validate_question(q, StubProject(sections=5))

    def test_dangling_frame(self):
        q = DrawPathQuestion(
            frame_id="nope:000000",
            target_section=0,
            prompt="retract",
            author_path=((0, 0), (10, 10)),
        )
        with pytest.raises(DanglingFrameRef):
            validate_question(q, StubProject())

    def test_one_point_path_rejected(self):
        with pytest.raises(PathTooShort):
            DrawPathQuestion(
                frame_id="v:000001",
                target_section=0,
                prompt="retract",
                author_path=((5, 5),),
            )

    def test_feedback_anchor_exclusivity(self):
        with pytest.raises(InvalidSpec):
            RegionFeedback(frame_id="v:000001", text="hi", section_id=1, ring=((0, 0), (1, 0), (1, 1)))
        with pytest.raises(InvalidSpec):
            RegionFeedback(frame_id="v:000001", text="hi")


class TestGradeMcq:
    def test_correct_choice(self):
        fb = RegionFeedback(frame_id="v:000001", text="good", section_id=2)
        q = McqQuestion(
            stem_text="s",
            options=(McqOption(text="a"), McqOption(text="b", feedback=(fb,))),
            correct=frozenset({1}),
        )
        correct, feedback = grade_mcq(q, [1])
        assert correct
        assert feedback == [fb]

    def test_wrong_single_choice_returns_its_feedback(self):
        fb = RegionFeedback(frame_id="v:000001", text="not this one", section_id=0)
        q = McqQuestion(
            stem_text="s",
            options=(McqOption(text="a", feedback=(fb,)), McqOption(text="b")),
            correct=frozenset({1}),
        )
        correct, feedback = grade_mcq(q, [0])
        assert not correct
        assert feedback == [fb]

    def test_empty_choice_incorrect_no_feedback(self):
        correct, feedback = grade_mcq(mcq(), [])
        assert not correct
        assert feedback == []

    def test_unknown_option(self):
        with pytest.raises(UnknownOption):
            grade_mcq(mcq(), [9])

    def test_partial_selection_is_incorrect(self):
        q = mcq(correct=frozenset({0, 1}))
        assert grade_mcq(q, [0])[0] is False
        assert grade_mcq(q, [0, 1])[0] is True


class TestGradePath:
    def question(self, path=((10.0, 10.0), (60.0, 10.0), (60.0, 40.0)), tol=30.0):
        return DrawPathQuestion(
            frame_id="v:000001",
            target_section=0,
            prompt="move",
            author_path=path,
            tolerance=tol,
        )

    def test_identical_path_full_score(self):
        q = self.question()
        score, passed = grade_path(q, q.author_path)
        assert score == 1.0
        assert passed

    def test_translation_by_tolerance_is_boundary_pass(self):
        q = self.question(tol=30.0)
        shifted = tuple((x + 30.0, y) for x, y in q.author_path)
        score, passed = grade_path(q, shifted)
        assert passed
        assert score == pytest.approx(0.5)
        beyond = tuple((x + 30.0001, y) for x, y in q.author_path)
        assert grade_path(q, beyond)[1] is False

    def test_reversed_author_path_full_score(self):
        q = self.question()
        score, passed = grade_path(q, tuple(reversed(q.author_path)))
        assert score == pytest.approx(1.0, abs=1e-9)
        assert passed

    def test_swap_symmetry(self, rng):
        a = [tuple(p) for p in rng.uniform(0, 100, (5, 2))]
        b = [tuple(p) for p in rng.uniform(0, 100, (7, 2))]
        assert path_distance(a, b) == pytest.approx(path_distance(b, a))

    def test_discrete_frechet_matches_recursive_oracle(self, rng):
        for _ in range(10):
            a = rng.uniform(0, 50, (6, 2))
            b = rng.uniform(0, 50, (8, 2))
            assert discrete_frechet(a, b) == pytest.approx(frechet_oracle(a, b))

    def test_short_student_path(self):
        with pytest.raises(PathTooShort):
            grade_path(self.question(), [(1.0, 1.0)])

    def test_resample_spacing_uniform(self):
        pts = resample_path([(0.0, 0.0), (10.0, 0.0)], 5)
        assert np.allclose(pts[:, 0], [0, 2.5, 5, 7.5, 10])

    def test_resample_zero_length(self):
        pts = resample_path([(3.0, 3.0), (3.0, 3.0)], 4)
        assert np.allclose(pts, 3.0)


class TestRenderHighlight:
    def image(self):
        return np.full((40, 50, 3), 200, dtype=np.uint8)

    def region(self):
        region = np.zeros((40, 50), dtype=bool)
        region[10:20, 15:30] = True
        return region

    def test_fill_changes_exactly_the_region(self):
        img = self.image()
        out = render_highlight(img, self.region(), "fill", color=(0, 0, 250))
        changed = (out != img).any(axis=2)
        assert np.array_equal(changed, self.region())
        blended = out[self.region()][0]
        assert tuple(blended) == (120, 120, 220)  # 0.6*200 + 0.4*color

    def test_outline_changes_only_boundary_band(self):
        from scipy.ndimage import binary_dilation, binary_erosion

        img = self.image()
        region = self.region()
        out = render_highlight(img, region, "outline", color=(255, 0, 0))
        changed = (out != img).any(axis=2)
        band = binary_dilation(region) & ~binary_erosion(region)
        assert np.array_equal(changed, band)
        # interior well inside the region is untouched
        assert (out[14, 20] == img[14, 20]).all()

    def test_whole_frame_ring_full_tint(self):
        img = self.image()
        region = np.ones((40, 50), dtype=bool)
        out = render_highlight(img, region, "fill", color=(0, 0, 0))
        assert ((out != img).any(axis=2)).all()

    def test_arrow_stays_near_box_shaft_and_region(self):
        img = self.image()
        out = render_highlight(img, self.region(), "arrow", color=(10, 10, 10))
        changed = (out != img).any(axis=2)
        assert changed.any()
        # nothing below the region is touched (arrow approaches from above)
        assert not changed[25:, :].any()

    def test_empty_region_rejected(self):
        with pytest.raises(DanglingSection):
            render_highlight(self.image(), np.zeros((40, 50), dtype=bool), "fill")

    def test_ring_region_mask_square(self):
        mask = ring_region_mask(((5, 5), (15, 5), (15, 12), (5, 12)), 30, 20)
        assert mask[8, 10]
        assert not mask[2, 2]


class FailingBackend:
    def inpaint(self, image, mask):
        raise BackendUnavailable("down for maintenance")


class TestInpaint:
    def test_single_pixel_uniform_surround(self):
        img = np.full((7, 7, 3), 90, dtype=np.uint8)
        mask = np.zeros((7, 7), dtype=bool)
        mask[3, 3] = True
        out = inpaint(img, mask)
        assert (out == 90).all()

    def test_unmasked_pixels_bit_identical(self, rng):
        img = rng.integers(0, 256, (20, 25, 3)).astype(np.uint8)
        mask = np.zeros((20, 25), dtype=bool)
        mask[5:12, 8:16] = True
        out = inpaint(img, mask)
        assert np.array_equal(out[~mask], img[~mask])

    def test_fill_interpolates_between_sides(self):
        img = np.zeros((10, 10, 3), dtype=np.uint8)
        img[:, 5:] = 200
        mask = np.zeros((10, 10), dtype=bool)
        mask[4:6, 3:7] = True
        out = inpaint(img, mask)
        left = out[5, 3].astype(int).mean()
        right = out[5, 6].astype(int).mean()
        assert left < right  # gradient follows the surroundings

    def test_remote_failure_falls_back_to_local(self, caplog):
        img = np.full((5, 5, 3), 10, dtype=np.uint8)
        mask = np.zeros((5, 5), dtype=bool)
        mask[2, 2] = True
        with caplog.at_level(logging.WARNING, logger="surgq.quiz"):
            out = inpaint(img, mask, backend=FailingBackend())
        assert (out == 10).all()
        assert any("local diffusion" in rec.message for rec in caplog.records)

    def test_empty_mask_rejected(self):
        with pytest.raises(InvalidSpec):
            inpaint(np.zeros((4, 4, 3), dtype=np.uint8), np.zeros((4, 4), dtype=bool))

    def test_grayscale_image_supported(self):
        img = np.full((6, 6), 77, dtype=np.uint8)
        mask = np.zeros((6, 6), dtype=bool)
        mask[2:4, 2:4] = True
        out = inpaint(img, mask)
        assert out.shape == img.shape
        assert (out == 77).all()


# -- serialization round-trip, property-tested over generated quizzes --------

points = st.lists(
    st.tuples(
        st.floats(0, 100, allow_nan=False).map(lambda v: round(v, 3)),
        st.floats(0, 100, allow_nan=False).map(lambda v: round(v, 3)),
    ),
    min_size=3,
    max_size=6,
).map(tuple)

feedback = st.builds(
    RegionFeedback,
    frame_id=st.just("v:000001"),
    text=st.text(min_size=1, max_size=20),
    highlight_style=st.sampled_from(["fill", "outline", "arrow"]),
    section_id=st.integers(0, 4),
    ring=st.none(),
)

mcq_questions = st.integers(2, 6).flatmap(
    lambda n: st.builds(
        McqQuestion,
        stem_text=st.text(min_size=1, max_size=30),
        options=st.lists(
            st.builds(
                McqOption,
                text=st.text(min_size=1, max_size=15),
                image_asset=st.none() | st.just("pic.png"),
                feedback=st.lists(feedback, max_size=2).map(tuple),
            ),
            min_size=n,
            max_size=n,
        ).map(tuple),
        correct=st.sets(st.integers(0, n - 1), min_size=1).map(frozenset),
        stem_images=st.lists(st.just("pic.png"), max_size=1).map(tuple),
    )
)

extract_questions = st.builds(
    ExtractComponentQuestion,
    frame_id=st.just("v:000001"),
    removed_section=st.integers(0, 4),
    inpainted_asset=st.just("cutout.png"),
    prompt=st.text(min_size=1, max_size=30),
    accepted_tools=st.sets(st.integers(0, 8), min_size=1, max_size=3).map(frozenset),
    placement_ring=points,
)

path_questions = st.builds(
    DrawPathQuestion,
    frame_id=st.just("v:000001"),
    target_section=st.integers(0, 4),
    prompt=st.text(min_size=1, max_size=30),
    author_path=points,
    tolerance=st.floats(1, 80, allow_nan=False).map(lambda v: round(v, 2)),
)

quizzes = st.builds(
    Quiz,
    quiz_id=st.uuids().map(str),
    title=st.text(min_size=1, max_size=40),
    questions=st.lists(
        st.one_of(mcq_questions, extract_questions, path_questions),
        min_size=1,
        max_size=4,
    ).map(tuple),
    author=st.text(max_size=15),
    created_ms=st.integers(0, 2**40),
    modified_ms=st.integers(0, 2**40),
    source_videos=st.lists(st.just("v"), max_size=1).map(tuple),
)


@settings(max_examples=150, deadline=None)
@given(quizzes)
def test_quiz_serialization_roundtrip(quiz):
    assert quiz_from_dict(quiz_to_dict(quiz)) == quiz
