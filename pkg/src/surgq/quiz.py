"""Quiz data model, validation, grading, and region-anchored feedback.

Three question types are supported: multiple choice (with per-option
feedback anchored to scene regions), extract-a-component (a tool is removed
from the frame by inpainting and the learner picks the tool and placement),
and draw-a-path (the learner traces a motion over a target component and is
scored against the author's path).

Documents serialize to JSON under the "surgquiz/1" schema with the question
variant carried in a "type" tag.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence, Union

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion

from .errors import (
    BackendUnavailable,
    DanglingFrameRef,
    DanglingSection,
    EmptyCorrectSet,
    InvalidSpec,
    PathTooShort,
    UnknownOption,
)
from .scene import CLASS_PALETTE

log = logging.getLogger(__name__)

QUIZ_SCHEMA = "surgquiz/1"

HIGHLIGHT_STYLES = ("fill", "outline", "arrow")

DEFAULT_PATH_TOLERANCE = 30.0
PATH_RESAMPLE_POINTS = 32

# Defaults for the feedback editor's sentence starters. Projects carry an
# editable copy (feedback_starters.json); authors can start from scratch too.
FEEDBACK_SENTENCE_STARTERS = (
    "Notice how the {component} ...",
    "This is a good example of ... because the {component} ...",
    "Before dissecting here, check that the {component} ...",
    "The {component} tells you that ...",
)

FEEDBACK_STARTERS_FILE = "feedback_starters.json"


def load_feedback_starters(project_root=None) -> tuple[str, ...]:
    """Sentence starters from the project's config file, or the defaults."""
    if project_root is not None:
        import json
        from pathlib import Path

        path = Path(project_root) / FEEDBACK_STARTERS_FILE
        if path.is_file():
            return tuple(str(s) for s in json.loads(path.read_text()))
    return FEEDBACK_SENTENCE_STARTERS

Point = tuple[float, float]


def _as_points(points) -> tuple[Point, ...]:
    return tuple((float(x), float(y)) for x, y in points)


@dataclass(frozen=True)
class RegionFeedback:
    """Feedback text bound to a region of a frame: a section or an explicit ring."""

    frame_id: str
    text: str
    highlight_style: str = "fill"
    section_id: Optional[int] = None
    ring: Optional[tuple[Point, ...]] = None

    def __post_init__(self):
        if not self.text:
            raise InvalidSpec("feedback text must be non-empty")
        if self.highlight_style not in HIGHLIGHT_STYLES:
            raise InvalidSpec(f"unknown highlight style {self.highlight_style!r}")
        if (self.section_id is None) == (self.ring is None):
            raise InvalidSpec("anchor must be exactly one of section_id or ring")
        if self.ring is not None:
            object.__setattr__(self, "ring", _as_points(self.ring))


@dataclass(frozen=True)
class McqOption:
    text: str = ""
    image_asset: Optional[str] = None
    feedback: tuple[RegionFeedback, ...] = ()

    def __post_init__(self):
        if not self.text and self.image_asset is None:
            raise InvalidSpec("an option needs text and/or an image")
        object.__setattr__(self, "feedback", tuple(self.feedback))


@dataclass(frozen=True)
class McqQuestion:
    stem_text: str
    options: tuple[McqOption, ...]
    correct: frozenset[int]
    stem_images: tuple[str, ...] = ()

    type_tag = "mcq"

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        object.__setattr__(self, "correct", frozenset(self.correct))
        object.__setattr__(self, "stem_images", tuple(self.stem_images))
        if not 2 <= len(self.options) <= 6:
            raise InvalidSpec(f"MCQ needs 2-6 options, got {len(self.options)}")
        if not self.correct:
            raise EmptyCorrectSet("MCQ correct set is empty")
        if not self.correct <= set(range(len(self.options))):
            raise UnknownOption(f"correct set {sorted(self.correct)} outside option range")


@dataclass(frozen=True)
class ExtractComponentQuestion:
    frame_id: str
    removed_section: int
    inpainted_asset: str
    prompt: str
    accepted_tools: frozenset[int]
    placement_ring: tuple[Point, ...]

    type_tag = "extract"

    def __post_init__(self):
        object.__setattr__(self, "accepted_tools", frozenset(self.accepted_tools))
        object.__setattr__(self, "placement_ring", _as_points(self.placement_ring))
        if not self.accepted_tools:
            raise EmptyCorrectSet("no accepted tool classes in the answer key")
        if len(self.placement_ring) < 3:
            raise InvalidSpec("placement region needs >= 3 vertices")


@dataclass(frozen=True)
class DrawPathQuestion:
    frame_id: str
    target_section: int
    prompt: str
    author_path: tuple[Point, ...]
    tolerance: float = DEFAULT_PATH_TOLERANCE

    type_tag = "path"

    def __post_init__(self):
        object.__setattr__(self, "author_path", _as_points(self.author_path))
        if len(self.author_path) < 2:
            raise PathTooShort(f"author path has {len(self.author_path)} point(s)")
        if self.tolerance <= 0:
            raise InvalidSpec("tolerance must be positive")


Question = Union[McqQuestion, ExtractComponentQuestion, DrawPathQuestion]


@dataclass(frozen=True)
class Quiz:
    quiz_id: str
    title: str
    questions: tuple[Question, ...]
    author: str = ""
    created_ms: int = 0
    modified_ms: int = 0
    source_videos: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "questions", tuple(self.questions))
        object.__setattr__(self, "source_videos", tuple(self.source_videos))
        if not self.questions:
            raise InvalidSpec("a quiz needs at least one question")


class ProjectAssets(Protocol):
    """What validation needs to know about the surrounding project."""

    def has_frame(self, frame_id: str) -> bool: ...

    def n_sections(self, frame_id: str) -> int: ...

    def has_asset(self, name: str) -> bool: ...

    def canvas_size(self) -> tuple[int, int]: ...


def _check_anchor(fb: RegionFeedback, project: ProjectAssets, where: str) -> None:
    if not project.has_frame(fb.frame_id):
        raise DanglingFrameRef(f"{where}: unknown frame {fb.frame_id!r}")
    if fb.section_id is not None and not (
        0 <= fb.section_id < project.n_sections(fb.frame_id)
    ):
        raise DanglingSection(f"{where}: frame {fb.frame_id!r} has no section {fb.section_id}")


def validate_question(question: Question, project: ProjectAssets) -> Question:
    """Resolve every frame, section, and asset reference against the project."""
    if isinstance(question, McqQuestion):
        for img in question.stem_images:
            if not project.has_asset(img):
                raise DanglingFrameRef(f"stem image {img!r} not in the project")
        for i, opt in enumerate(question.options):
            if opt.image_asset and not project.has_asset(opt.image_asset):
                raise DanglingFrameRef(f"option {i} image {opt.image_asset!r} not in the project")
            for j, fb in enumerate(opt.feedback):
                _check_anchor(fb, project, f"option {i} feedback {j}")
    elif isinstance(question, ExtractComponentQuestion):
        if not project.has_frame(question.frame_id):
            raise DanglingFrameRef(f"unknown frame {question.frame_id!r}")
        if not 0 <= question.removed_section < project.n_sections(question.frame_id):
            raise DanglingSection(
                f"frame {question.frame_id!r} has no section {question.removed_section}"
            )
        if not project.has_asset(question.inpainted_asset):
            raise DanglingFrameRef(f"inpainted asset {question.inpainted_asset!r} missing")
    elif isinstance(question, DrawPathQuestion):
        if not project.has_frame(question.frame_id):
            raise DanglingFrameRef(f"unknown frame {question.frame_id!r}")
        if not 0 <= question.target_section < project.n_sections(question.frame_id):
            raise DanglingSection(
                f"frame {question.frame_id!r} has no section {question.target_section}"
            )
        w, h = project.canvas_size()
        for x, y in question.author_path:
            if not (0 <= x <= w and 0 <= y <= h):
                raise InvalidSpec(f"author path point ({x}, {y}) outside canvas {w}x{h}")
    else:
        raise InvalidSpec(f"unknown question type {type(question).__name__}")
    return question


def validate_quiz(quiz: Quiz, project: ProjectAssets) -> Quiz:
    for question in quiz.questions:
        validate_question(question, project)
    return quiz


# ---------------------------------------------------------------------------
# Grading.

def grade_mcq(
    question: McqQuestion, chosen: Sequence[int]
) -> tuple[bool, list[RegionFeedback]]:
    """Exact-set grading; returns the chosen options' feedback for display."""
    chosen_set = frozenset(int(c) for c in chosen)
    if not chosen_set <= set(range(len(question.options))):
        unknown = sorted(chosen_set - set(range(len(question.options))))
        raise UnknownOption(f"chosen option(s) {unknown} do not exist")
    feedback = [fb for i in sorted(chosen_set) for fb in question.options[i].feedback]
    return chosen_set == question.correct, feedback


def resample_path(path: Sequence[Point], n_points: int = PATH_RESAMPLE_POINTS) -> np.ndarray:
    """Resample a polyline to n points equally spaced by arc length."""
    pts = np.asarray(path, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 2:
        raise PathTooShort(f"path has shape {pts.shape}")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0:
        return np.repeat(pts[:1], n_points, axis=0)
    targets = np.linspace(0.0, total, n_points)
    out = np.empty((n_points, 2))
    out[:, 0] = np.interp(targets, cum, pts[:, 0])
    out[:, 1] = np.interp(targets, cum, pts[:, 1])
    return out


def discrete_frechet(a: np.ndarray, b: np.ndarray) -> float:
    """Discrete Fréchet distance between two point sequences."""
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    n, m = d.shape
    ca = np.empty((n, m))
    ca[0, 0] = d[0, 0]
    for j in range(1, m):
        ca[0, j] = max(ca[0, j - 1], d[0, j])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        for j in range(1, m):
            ca[i, j] = max(min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1]), d[i, j])
    return float(ca[-1, -1])


def path_distance(author: Sequence[Point], student: Sequence[Point]) -> float:
    """Orientation-agnostic Fréchet distance between arc-length-resampled paths."""
    a = resample_path(author)
    s = resample_path(student)
    return min(discrete_frechet(a, s), discrete_frechet(a[::-1], s))


def grade_path(
    question: DrawPathQuestion, student_path: Sequence[Point]
) -> tuple[float, bool]:
    """Score in [0, 1] and pass flag for a drawn path.

    Pass iff the path distance stays within the authored tolerance; the score
    decays linearly and reaches 0 at twice the tolerance.
    """
    if len(student_path) < 2:
        raise PathTooShort(f"student path has {len(student_path)} point(s)")
    dist = path_distance(question.author_path, student_path)
    score = max(0.0, 1.0 - dist / (2.0 * question.tolerance))
    return score, dist <= question.tolerance


# ---------------------------------------------------------------------------
# Highlight rendering.

def ring_region_mask(ring: Sequence[Point], width: int, height: int) -> np.ndarray:
    """Boolean mask of the ring interior (even-odd at pixel centers)."""
    from .geometry import _fill_even_odd

    return _fill_even_odd(np.asarray(ring, dtype=np.float64), width, height)


def render_highlight(
    image: np.ndarray,
    region: np.ndarray,
    style: str = "fill",
    color: tuple[int, int, int] | None = None,
    class_id: int | None = None,
) -> np.ndarray:
    """Composite a region highlight onto an RGB image.

    fill tints the region at 40% opacity; outline strokes a ~2 px band along
    the region boundary; arrow draws a label box outside the region with a
    shaft to the region centroid. Pixels elsewhere are untouched.
    """
    if style not in HIGHLIGHT_STYLES:
        raise InvalidSpec(f"unknown highlight style {style!r}")
    region = np.asarray(region, dtype=bool)
    if region.shape != image.shape[:2]:
        raise DanglingSection(
            f"region {region.shape} does not match image {image.shape[:2]}"
        )
    if not region.any():
        raise DanglingSection("anchor resolves to an empty region")
    if color is None:
        color = CLASS_PALETTE[class_id] if class_id is not None else (255, 220, 0)
    out = image.copy()
    rgb = np.array(color, dtype=np.float64)

    if style == "fill":
        blended = image[region].astype(np.float64) * 0.6 + rgb * 0.4
        out[region] = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    elif style == "outline":
        band = binary_dilation(region) & ~binary_erosion(region)
        out[band] = np.array(color, dtype=np.uint8)
    else:  # arrow
        _draw_arrow(out, region, np.array(color, dtype=np.uint8))
    return out


def _draw_line(out: np.ndarray, p0: np.ndarray, p1: np.ndarray, color: np.ndarray, thickness: int = 2) -> None:
    h, w = out.shape[:2]
    n = int(np.ceil(np.linalg.norm(p1 - p0))) * 2 + 1
    for t in np.linspace(0.0, 1.0, n):
        x, y = p0 + t * (p1 - p0)
        x0, y0 = int(round(x)), int(round(y))
        half = thickness // 2
        ys = slice(max(0, y0 - half), min(h, y0 + half + 1))
        xs = slice(max(0, x0 - half), min(w, x0 + half + 1))
        out[ys, xs] = color


def _draw_arrow(out: np.ndarray, region: np.ndarray, color: np.ndarray) -> None:
    h, w = out.shape[:2]
    ys, xs = np.nonzero(region)
    cy, cx = float(ys.mean()), float(xs.mean())
    top = int(ys.min())
    # label box above the region, clamped to the canvas
    box_w, box_h = 40, 16
    bx = int(np.clip(cx - box_w / 2, 0, max(0, w - box_w)))
    by = int(np.clip(top - box_h - 12, 0, max(0, h - box_h)))
    out[by : by + box_h, bx : bx + box_w] = color
    start = np.array([bx + box_w / 2, by + box_h], dtype=np.float64)
    tip = np.array([cx, cy], dtype=np.float64)
    _draw_line(out, start, tip, color)
    # arrow head: two short back-strokes
    direction = tip - start
    norm = np.linalg.norm(direction)
    if norm > 1e-9:
        direction /= norm
        perp = np.array([-direction[1], direction[0]])
        for side in (1, -1):
            _draw_line(out, tip, tip - 8 * direction + side * 5 * perp, color)


# ---------------------------------------------------------------------------
# Inpainting: a pluggable backend boundary with a local diffusion fallback.

class InpaintBackend(Protocol):
    def inpaint(self, image: np.ndarray, mask: np.ndarray) -> np.ndarray: ...


class LocalDiffusionBackend:
    """Fills the mask by iterated 4-neighbor averaging (Jacobi sweeps).

    Masked pixels start from the mean color of the mask's outer boundary and
    relax toward the harmonic interpolation of the surrounding pixels.
    Unmasked pixels are returned bit-identical.
    """

    def __init__(self, sweeps: int = 64):
        self.sweeps = sweeps

    def inpaint(self, image: np.ndarray, mask: np.ndarray) -> np.ndarray:
        mask = np.asarray(mask, dtype=bool)
        work = image.astype(np.float64)
        if work.ndim == 2:
            work = work[:, :, None]
        h, w, _ = work.shape
        ring = binary_dilation(mask) & ~mask
        seed = work[ring].mean(axis=0) if ring.any() else np.full(work.shape[2], 128.0)
        work[mask] = seed

        for _ in range(self.sweeps):
            acc = np.zeros_like(work)
            cnt = np.zeros((h, w, 1))
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                src_y = slice(max(dy, 0), h + min(dy, 0))
                src_x = slice(max(dx, 0), w + min(dx, 0))
                dst_y = slice(max(-dy, 0), h + min(-dy, 0))
                dst_x = slice(max(-dx, 0), w + min(-dx, 0))
                acc[dst_y, dst_x] += work[src_y, src_x]
                cnt[dst_y, dst_x] += 1
            work[mask] = (acc / cnt)[mask]

        filled = np.clip(np.rint(work), 0, 255).astype(np.uint8)
        if image.ndim == 2:
            filled = filled[:, :, 0]
        out = image.copy()
        out[mask] = filled[mask]
        return out


class RemoteInpaintBackend:
    """HTTP backend: POST multipart image + mask PNG, receive the filled PNG."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def inpaint(self, image: np.ndarray, mask: np.ndarray) -> np.ndarray:
        import io

        import requests
        from PIL import Image

        def png_bytes(arr) -> bytes:
            buf = io.BytesIO()
            Image.fromarray(arr).save(buf, format="PNG")
            return buf.getvalue()

        mask_png = png_bytes((np.asarray(mask, dtype=np.uint8) * 255))
        try:
            resp = requests.post(
                self.url,
                files={
                    "image": ("image.png", png_bytes(image), "image/png"),
                    "mask": ("mask.png", mask_png, "image/png"),
                },
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(f"inpaint backend {self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(
                f"inpaint backend {self.url} returned {resp.status_code}"
            )
        from PIL import Image as PILImage

        return np.array(PILImage.open(io.BytesIO(resp.content)).convert("RGB"))


def inpaint(
    image: np.ndarray,
    mask: np.ndarray,
    backend: InpaintBackend | None = None,
) -> np.ndarray:
    """Replace masked pixels; everything else stays bit-identical.

    When a remote backend fails the local diffusion fill takes over with a
    logged warning, so the feature works offline.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.shape[:2]:
        raise InvalidSpec(f"mask {mask.shape} does not fit image {image.shape[:2]}")
    if not mask.any():
        raise InvalidSpec("inpaint mask is empty")
    if backend is not None:
        try:
            return backend.inpaint(image, mask)
        except BackendUnavailable as exc:
            log.warning("remote inpaint failed (%s); using local diffusion fill", exc)
    return LocalDiffusionBackend().inpaint(image, mask)


# ---------------------------------------------------------------------------
# JSON (de)serialization, schema "surgquiz/1".

def _feedback_to_dict(fb: RegionFeedback) -> dict:
    data = {"frame": fb.frame_id, "text": fb.text, "style": fb.highlight_style}
    if fb.section_id is not None:
        data["section"] = fb.section_id
    else:
        data["ring"] = [list(p) for p in fb.ring]
    return data


def _feedback_from_dict(data: dict) -> RegionFeedback:
    return RegionFeedback(
        frame_id=data["frame"],
        text=data["text"],
        highlight_style=data.get("style", "fill"),
        section_id=data.get("section"),
        ring=data.get("ring"),
    )


def question_to_dict(question: Question) -> dict:
    if isinstance(question, McqQuestion):
        return {
            "type": "mcq",
            "stem": question.stem_text,
            "stem_images": list(question.stem_images),
            "options": [
                {
                    "text": o.text,
                    "image": o.image_asset,
                    "feedback": [_feedback_to_dict(fb) for fb in o.feedback],
                }
                for o in question.options
            ],
            "correct": sorted(question.correct),
        }
    if isinstance(question, ExtractComponentQuestion):
        return {
            "type": "extract",
            "frame": question.frame_id,
            "removed_section": question.removed_section,
            "inpainted_asset": question.inpainted_asset,
            "prompt": question.prompt,
            "accepted_tools": sorted(question.accepted_tools),
            "placement_ring": [list(p) for p in question.placement_ring],
        }
    if isinstance(question, DrawPathQuestion):
        return {
            "type": "path",
            "frame": question.frame_id,
            "target_section": question.target_section,
            "prompt": question.prompt,
            "author_path": [list(p) for p in question.author_path],
            "tolerance": question.tolerance,
        }
    raise InvalidSpec(f"unknown question type {type(question).__name__}")


def question_from_dict(data: dict) -> Question:
    kind = data.get("type")
    if kind == "mcq":
        return McqQuestion(
            stem_text=data["stem"],
            stem_images=tuple(data.get("stem_images", ())),
            options=tuple(
                McqOption(
                    text=o.get("text", ""),
                    image_asset=o.get("image"),
                    feedback=tuple(_feedback_from_dict(f) for f in o.get("feedback", ())),
                )
                for o in data["options"]
            ),
            correct=frozenset(data["correct"]),
        )
    if kind == "extract":
        return ExtractComponentQuestion(
            frame_id=data["frame"],
            removed_section=data["removed_section"],
            inpainted_asset=data["inpainted_asset"],
            prompt=data["prompt"],
            accepted_tools=frozenset(data["accepted_tools"]),
            placement_ring=data["placement_ring"],
        )
    if kind == "path":
        return DrawPathQuestion(
            frame_id=data["frame"],
            target_section=data["target_section"],
            prompt=data["prompt"],
            author_path=data["author_path"],
            tolerance=data.get("tolerance", DEFAULT_PATH_TOLERANCE),
        )
    raise InvalidSpec(f"unknown question type tag {kind!r}")


def quiz_to_dict(quiz: Quiz) -> dict:
    return {
        "schema": QUIZ_SCHEMA,
        "id": quiz.quiz_id,
        "title": quiz.title,
        "author": quiz.author,
        "created_ms": quiz.created_ms,
        "modified_ms": quiz.modified_ms,
        "source_videos": list(quiz.source_videos),
        "questions": [question_to_dict(q) for q in quiz.questions],
    }


def quiz_from_dict(data: dict) -> Quiz:
    if data.get("schema") != QUIZ_SCHEMA:
        raise InvalidSpec(f"unsupported quiz schema {data.get('schema')!r}")
    return Quiz(
        quiz_id=data["id"],
        title=data["title"],
        author=data.get("author", ""),
        created_ms=data.get("created_ms", 0),
        modified_ms=data.get("modified_ms", 0),
        source_videos=tuple(data.get("source_videos", ())),
        questions=tuple(question_from_dict(q) for q in data["questions"]),
    )


def touch_modified(quiz: Quiz, now_ms: int) -> Quiz:
    return replace(quiz, modified_ms=now_ms)
