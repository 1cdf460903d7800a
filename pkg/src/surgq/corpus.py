"""Project persistence, dataset import, and synthetic scene generation.

A project is a plain directory: `manifest.json` plus subdirectories for
frame images, class maps, section masks, features, quizzes, and assets.
Plain files keep the corpus inspectable and diffable. Writers serialize
through an advisory lock file; manifest rewrites are atomic
(write-temp-then-rename).

The synthetic generator builds scenes from random ellipse blobs painted in
the canvas z-order, derives ground-truth sections as connected components,
and corrupts the class map with bounded per-section label noise. Because the
noise is kept a strict minority inside every section, majority voting must
recover the clean map exactly, which turns the fusion behavior into a
testable oracle.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from filelock import FileLock
from PIL import Image
from scipy import ndimage

from . import keyframes as kf
from .errors import CorruptManifest, InvalidSpec, MissingAsset, UnknownSourceClass
from .geometry import Z_ORDER
from .quiz import Quiz, quiz_from_dict, quiz_to_dict
from .scene import (
    BACKGROUND,
    N_CLASSES,
    ClassMap,
    FrameRef,
    SectionMask,
    load_class_map,
    load_section_mask,
    render_overlay,
    save_class_map,
    save_section_mask,
)

MANIFEST_SCHEMA = "surgproj/1"
MANIFEST_NAME = "manifest.json"
LOCK_NAME = ".surgq.lock"

SUBDIRS = ("frames", "classmaps", "sections", "truth", "thumbs", "quizzes", "assets")

THUMB_WIDTH = 320


@dataclass(frozen=True)
class FrameEntry:
    ref: FrameRef
    classmap_path: str
    sections_path: str
    image_path: Optional[str] = None
    thumb_path: Optional[str] = None
    truth_path: Optional[str] = None

    @property
    def frame_id(self) -> str:
        return self.ref.frame_id


@dataclass
class Project:
    root: Path
    canvas: tuple[int, int]  # (width, height)
    videos: list[str] = field(default_factory=list)
    frames: list[FrameEntry] = field(default_factory=list)
    features: dict[str, str] = field(default_factory=dict)  # video_id -> path
    quiz_ids: list[str] = field(default_factory=list)
    index_fingerprint: Optional[str] = None
    index_grid: Optional[tuple[int, int]] = None

    def __post_init__(self):
        self.root = Path(self.root)
        self._frame_lookup = {e.frame_id: e for e in self.frames}
        self._section_counts: dict[str, int] = {}
        # one reentrant lock object per Project; separate Project instances
        # (other processes, other handles) contend on the lock file itself
        self._lock = FileLock(str(self.root / LOCK_NAME))

    # -- paths ------------------------------------------------------------
    def path(self, rel: str) -> Path:
        return self.root / rel

    def lock(self) -> FileLock:
        return self._lock

    # -- frame access -----------------------------------------------------
    def frame(self, frame_id: str) -> FrameEntry:
        try:
            return self._frame_lookup[frame_id]
        except KeyError:
            raise MissingAsset(frame_id) from None

    def has_frame(self, frame_id: str) -> bool:
        return frame_id in self._frame_lookup

    def load_pair(self, frame_id: str) -> tuple[ClassMap, SectionMask]:
        entry = self.frame(frame_id)
        return (
            load_class_map(self.path(entry.classmap_path)),
            load_section_mask(self.path(entry.sections_path)),
        )

    def n_sections(self, frame_id: str) -> int:
        if frame_id not in self._section_counts:
            entry = self.frame(frame_id)
            mask = load_section_mask(self.path(entry.sections_path))
            self._section_counts[frame_id] = mask.n_sections
        return self._section_counts[frame_id]

    def has_asset(self, name: str) -> bool:
        return (self.root / "assets" / name).is_file()

    def canvas_size(self) -> tuple[int, int]:
        return self.canvas

    def load_features(self, video_id: str) -> kf.FeatureSeries:
        rel = self.features.get(video_id)
        if rel is None:
            raise MissingAsset(f"features for video {video_id!r}")
        return kf.load_features(self.path(rel), video_id=video_id)

    # -- quiz storage -----------------------------------------------------
    def quiz_path(self, quiz_id: str) -> Path:
        return self.root / "quizzes" / f"{quiz_id}.json"

    def load_quiz(self, quiz_id: str) -> Quiz:
        path = self.quiz_path(quiz_id)
        if not path.is_file():
            raise MissingAsset(str(path))
        return quiz_from_dict(json.loads(path.read_text()))

    def save_quiz(self, quiz: Quiz) -> None:
        with self.lock():
            self.quiz_path(quiz.quiz_id).write_text(
                json.dumps(quiz_to_dict(quiz), indent=1)
            )
            if quiz.quiz_id not in self.quiz_ids:
                self.quiz_ids.append(quiz.quiz_id)
            _write_manifest(self)

    def delete_quiz(self, quiz_id: str) -> None:
        with self.lock():
            path = self.quiz_path(quiz_id)
            if not path.is_file():
                raise MissingAsset(str(path))
            path.unlink()
            self.quiz_ids.remove(quiz_id)
            _write_manifest(self)


# ---------------------------------------------------------------------------
# Manifest I/O.

def _manifest_dict(project: Project) -> dict:
    return {
        "schema": MANIFEST_SCHEMA,
        "canvas": {"width": project.canvas[0], "height": project.canvas[1]},
        "videos": list(project.videos),
        "frames": [
            {
                "video": e.ref.video_id,
                "index": e.ref.frame_index,
                "timestamp_ms": e.ref.timestamp_ms,
                "classmap": e.classmap_path,
                "sections": e.sections_path,
                "image": e.image_path,
                "thumb": e.thumb_path,
                "truth": e.truth_path,
            }
            for e in project.frames
        ],
        "features": dict(project.features),
        "quizzes": list(project.quiz_ids),
        "index": (
            {
                "fingerprint": project.index_fingerprint,
                "grid": list(project.index_grid) if project.index_grid else None,
            }
            if project.index_fingerprint
            else None
        ),
    }


def _write_manifest(project: Project) -> None:
    path = project.root / MANIFEST_NAME
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(_manifest_dict(project), indent=1))
    os.replace(tmp, path)


def init_project(root: str | Path, canvas: tuple[int, int]) -> Project:
    """Create an empty project directory tree with a fresh manifest."""
    from .quiz import FEEDBACK_SENTENCE_STARTERS, FEEDBACK_STARTERS_FILE

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for sub in SUBDIRS:
        (root / sub).mkdir(exist_ok=True)
    starters = root / FEEDBACK_STARTERS_FILE
    if not starters.is_file():
        starters.write_text(json.dumps(list(FEEDBACK_SENTENCE_STARTERS), indent=1))
    project = Project(root=root, canvas=canvas)
    save_project(project)
    return project


def save_project(project: Project) -> None:
    """Persist the manifest atomically under the single-writer lock."""
    with project.lock():
        _write_manifest(project)


def load_project(path: str | Path, deep: bool = False) -> Project:
    """Load and validate a project.

    Always verifies that every referenced file exists; deep=True additionally
    parses every grid to catch corrupt or out-of-range content.
    """
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise MissingAsset(str(manifest_path))
    try:
        data = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptManifest(f"{manifest_path}: {exc}") from exc
    if data.get("schema") != MANIFEST_SCHEMA:
        raise CorruptManifest(f"unsupported manifest schema {data.get('schema')!r}")
    try:
        canvas = (int(data["canvas"]["width"]), int(data["canvas"]["height"]))
        frames = []
        for f in data["frames"]:
            frames.append(
                FrameEntry(
                    ref=FrameRef(f["video"], int(f["index"]), int(f["timestamp_ms"])),
                    classmap_path=f["classmap"],
                    sections_path=f["sections"],
                    image_path=f.get("image"),
                    thumb_path=f.get("thumb"),
                    truth_path=f.get("truth"),
                )
            )
        index = data.get("index") or {}
        project = Project(
            root=root,
            canvas=canvas,
            videos=list(data.get("videos", [])),
            frames=sorted(frames, key=lambda e: (e.ref.video_id, e.ref.frame_index)),
            features=dict(data.get("features", {})),
            quiz_ids=list(data.get("quizzes", [])),
            index_fingerprint=index.get("fingerprint"),
            index_grid=tuple(index["grid"]) if index.get("grid") else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptManifest(f"{manifest_path}: {exc}") from exc

    by_video: dict[str, FrameEntry] = {}
    for entry in project.frames:
        prev = by_video.get(entry.ref.video_id)
        if prev is not None and entry.ref.timestamp_ms <= prev.ref.timestamp_ms:
            raise CorruptManifest(
                f"{entry.frame_id}: timestamps must increase with frame index"
            )
        by_video[entry.ref.video_id] = entry
        for rel in (
            entry.classmap_path,
            entry.sections_path,
            entry.image_path,
            entry.thumb_path,
            entry.truth_path,
        ):
            if rel is not None and not project.path(rel).is_file():
                raise MissingAsset(rel)
    for rel in project.features.values():
        if not project.path(rel).is_file():
            raise MissingAsset(rel)
    for quiz_id in project.quiz_ids:
        if not project.quiz_path(quiz_id).is_file():
            raise MissingAsset(str(project.quiz_path(quiz_id)))

    if deep:
        for entry in project.frames:
            pair = project.load_pair(entry.frame_id)
            if (pair[0].width, pair[0].height) != project.canvas:
                raise CorruptManifest(
                    f"{entry.frame_id}: grid size differs from the project canvas"
                )
    return project


# ---------------------------------------------------------------------------
# Dataset import with a declared class-mapping table.

# Source annotation values for CholecSeg8k watershed masks (grayscale).
DEFAULT_CHOLECSEG8K_MAPPING = {
    "name": "cholecseg8k-default",
    "mode": "gray",
    "classes": [
        {"source": 50, "source_name": "Black Background", "target": 0},
        {"source": 11, "source_name": "Abdominal Wall", "target": 1},
        {"source": 21, "source_name": "Liver", "target": 2},
        {"source": 13, "source_name": "Gastrointestinal Tract", "target": 3},
        {"source": 12, "source_name": "Fat", "target": 4},
        {"source": 31, "source_name": "Grasper", "target": 5},
        {"source": 32, "source_name": "L-hook Electrocautery", "target": 5},
        {"source": 24, "source_name": "Blood", "target": 6},
        {"source": 23, "source_name": "Connective Tissue", "target": 7},
        {"source": 25, "source_name": "Cystic Duct", "target": 7},
        {"source": 22, "source_name": "Gallbladder", "target": 8},
        {"source": 33, "source_name": "Hepatic Vein", "target": 2},
        {"source": 5, "source_name": "Liver Ligament", "target": 2},
    ],
}

# Best-effort defaults for m2caiSeg (RGB-coded annotations). Instrument
# classes all collapse into Tool. Review the source colors against the
# dataset release before a real import.
DEFAULT_M2CAISEG_MAPPING = {
    "name": "m2caiseg-default",
    "mode": "rgb",
    "classes": [
        {"source": [0, 0, 0], "source_name": "Black", "target": 0},
        {"source": [170, 0, 255], "source_name": "Unknown", "target": 0},
        {"source": [255, 0, 0], "source_name": "Grasper", "target": 5},
        {"source": [255, 255, 0], "source_name": "Bipolar", "target": 5},
        {"source": [255, 0, 255], "source_name": "Hook", "target": 5},
        {"source": [0, 255, 255], "source_name": "Scissors", "target": 5},
        {"source": [255, 127, 0], "source_name": "Clipper", "target": 5},
        {"source": [127, 127, 255], "source_name": "Irrigator", "target": 5},
        {"source": [127, 255, 127], "source_name": "Specimen Bag", "target": 0},
        {"source": [255, 127, 127], "source_name": "Trocars", "target": 5},
        {"source": [127, 127, 127], "source_name": "Clip", "target": 5},
        {"source": [0, 255, 0], "source_name": "Liver", "target": 2},
        {"source": [0, 127, 0], "source_name": "Gall Bladder", "target": 8},
        {"source": [255, 255, 127], "source_name": "Fat", "target": 4},
        {"source": [127, 0, 0], "source_name": "Upper Wall", "target": 1},
        {"source": [0, 0, 255], "source_name": "Artery", "target": 7},
        {"source": [0, 0, 127], "source_name": "Intestine", "target": 3},
        {"source": [255, 255, 255], "source_name": "Bile", "target": 6},
        {"source": [127, 0, 127], "source_name": "Blood", "target": 6},
    ],
}

BUILTIN_MAPPINGS = {
    "cholecseg8k": DEFAULT_CHOLECSEG8K_MAPPING,
    "m2caiseg": DEFAULT_M2CAISEG_MAPPING,
}


def load_mapping(source: str | Path | dict) -> dict:
    """Accept a builtin mapping name, a config file path, or an inline dict."""
    if isinstance(source, dict):
        return source
    if str(source) in BUILTIN_MAPPINGS:
        return BUILTIN_MAPPINGS[str(source)]
    path = Path(source)
    if not path.is_file():
        raise MissingAsset(str(path))
    return json.loads(path.read_text())


def _remap_annotation(arr: np.ndarray, mapping: dict, strict: bool) -> tuple[np.ndarray, int]:
    """Translate a source annotation to 9-class labels.

    Unmapped source values become Background; the count of such pixels is
    returned so callers can warn, or raised under strict mode.
    """
    mode = mapping.get("mode", "gray")
    if mode == "gray":
        if arr.ndim != 2:
            arr = arr[..., 0]
        lut = np.full(int(arr.max()) + 1, -1, dtype=np.int16)
        for entry in mapping["classes"]:
            src = int(entry["source"])
            if src < len(lut):
                lut[src] = int(entry["target"])
        out = lut[arr]
    elif mode == "rgb":
        if arr.ndim != 3 or arr.shape[2] < 3:
            raise CorruptManifest("rgb mapping needs a 3-channel annotation")
        key = (
            arr[..., 0].astype(np.int64) * 65536
            + arr[..., 1].astype(np.int64) * 256
            + arr[..., 2].astype(np.int64)
        )
        out = np.full(key.shape, -1, dtype=np.int16)
        for entry in mapping["classes"]:
            r, g, b = entry["source"]
            out[key == (r * 65536 + g * 256 + b)] = int(entry["target"])
    else:
        raise InvalidSpec(f"unknown mapping mode {mode!r}")

    unmapped = int((out < 0).sum())
    if unmapped and strict:
        raise UnknownSourceClass(f"{unmapped} pixel(s) with unmapped source classes")
    out[out < 0] = BACKGROUND
    if (out > N_CLASSES - 1).any():
        raise InvalidSpec("mapping targets a class id above 8")
    return out.astype(np.uint8), unmapped


def sections_from_class_map(labels: np.ndarray) -> np.ndarray:
    """Connected components (4-adjacency) of a class map, one section each.

    Ids are contiguous, ordered by class then component discovery order,
    which is deterministic for a given map.
    """
    sections = np.zeros(labels.shape, dtype=np.int64)
    next_id = 0
    for value in np.unique(labels):
        comp, n = ndimage.label(labels == value)
        sections[comp > 0] = comp[comp > 0] + next_id - 1
        next_id += int(n)
    return sections


def import_dataset(
    project: Project,
    src_dir: str | Path,
    mapping: str | Path | dict,
    video_id: str = "import",
    strict: bool = False,
    frame_period_ms: int = 1000,
) -> tuple[list[FrameEntry], int]:
    """Ingest a directory of annotation PNGs into the project.

    Returns the new frame entries and the total count of unmapped pixels
    (mapped to Background with a warning tally unless strict).
    """
    src_dir = Path(src_dir)
    table = load_mapping(mapping)
    files = sorted(p for p in src_dir.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise MissingAsset(f"no .png annotations under {src_dir}")
    added = []
    total_unmapped = 0
    base_index = max(
        (e.ref.frame_index + 1 for e in project.frames if e.ref.video_id == video_id),
        default=0,
    )
    with project.lock():
        for offset, path in enumerate(files):
            arr = np.array(Image.open(path))
            labels, unmapped = _remap_annotation(arr, table, strict)
            total_unmapped += unmapped
            class_map = ClassMap(labels)
            sections = SectionMask(sections_from_class_map(labels))
            idx = base_index + offset
            ref = FrameRef(video_id, idx, idx * frame_period_ms)
            stem = f"{video_id}_{idx:06d}"
            entry = _store_frame(project, ref, stem, class_map, sections, truth=None)
            added.append(entry)
        if video_id not in project.videos:
            project.videos.append(video_id)
        project.frames.sort(key=lambda e: (e.ref.video_id, e.ref.frame_index))
        project._frame_lookup = {e.frame_id: e for e in project.frames}
        _write_manifest(project)
    return added, total_unmapped


def _store_frame(
    project: Project,
    ref: FrameRef,
    stem: str,
    class_map: ClassMap,
    sections: SectionMask,
    truth: Optional[ClassMap],
    render_images: bool = True,
) -> FrameEntry:
    classmap_rel = f"classmaps/{stem}.png"
    sections_rel = f"sections/{stem}.png"
    save_class_map(class_map, project.path(classmap_rel))
    save_section_mask(sections, project.path(sections_rel))
    truth_rel = None
    if truth is not None:
        truth_rel = f"truth/{stem}.png"
        save_class_map(truth, project.path(truth_rel))
    image_rel = thumb_rel = None
    if render_images:
        image_rel = f"frames/{stem}.png"
        thumb_rel = f"thumbs/{stem}.jpg"
        rgb = render_overlay(truth if truth is not None else class_map)
        # shade the flat palette render so region tints stay visible on it
        # (real deployments store actual photographic frames here)
        h, w = rgb.shape[:2]
        yy, xx = np.mgrid[0:h, 0:w]
        shade = 0.72 + 0.28 * (xx + yy) / max(w + h - 2, 1)
        rgb = np.clip(np.rint(rgb * shade[..., None]), 0, 255).astype(np.uint8)
        img = Image.fromarray(rgb)
        img.save(project.path(image_rel), format="PNG")
        scale = THUMB_WIDTH / img.width
        thumb = img.resize((THUMB_WIDTH, max(1, round(img.height * scale))))
        thumb.save(project.path(thumb_rel), format="JPEG", quality=85)
    entry = FrameEntry(ref, classmap_rel, sections_rel, image_rel, thumb_rel, truth_rel)
    project.frames.append(entry)
    project._frame_lookup[entry.frame_id] = entry
    return entry


# ---------------------------------------------------------------------------
# Synthetic ground-truth generator.

# Liver and Gallbladder are single organs: one blob each, fragmented only by
# later-painted occluders. The separable classes may scatter.
DEFAULT_BLOB_COUNTS = {
    2: (1, 1),  # Liver
    8: (1, 1),  # Gallbladder
    4: (1, 3),  # Fat
    3: (1, 3),  # Gastrointestinal Tract
    6: (0, 2),  # Blood
    5: (1, 2),  # Tool
}


@dataclass(frozen=True)
class SyntheticSpec:
    n_frames: int
    width: int = 854
    height: int = 480
    blob_counts: dict = field(default_factory=lambda: dict(DEFAULT_BLOB_COUNTS))
    radius_frac: tuple[float, float] = (0.08, 0.22)
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.noise <= 0.49:
            raise InvalidSpec(f"noise rate must be in [0, 0.49], got {self.noise}")
        if self.n_frames < 1:
            raise InvalidSpec("need at least one frame")


def _paint_ellipse(canvas: np.ndarray, rng: np.random.Generator, class_id: int, radius_px: tuple[float, float]) -> None:
    h, w = canvas.shape
    cx = rng.uniform(0.1 * w, 0.9 * w)
    cy = rng.uniform(0.1 * h, 0.9 * h)
    ax = rng.uniform(*radius_px)
    ay = rng.uniform(*radius_px)
    theta = rng.uniform(0, np.pi)
    # work only inside the ellipse's conservative bounding box
    r = max(ax, ay)
    x0, x1 = max(0, int(cx - r) - 1), min(w, int(cx + r) + 2)
    y0, y1 = max(0, int(cy - r) - 1), min(h, int(cy + r) + 2)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx, dy = xs - cx, ys - cy
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    patch = canvas[y0:y1, x0:x1]
    patch[(u / ax) ** 2 + (v / ay) ** 2 <= 1.0] = class_id


def synth_truth_map(spec: SyntheticSpec, rng: np.random.Generator) -> ClassMap:
    """One random scene: ellipse blobs painted in canvas z-order over Background."""
    canvas = np.zeros((spec.height, spec.width), dtype=np.uint8)
    lo = spec.radius_frac[0] * min(spec.width, spec.height)
    hi = spec.radius_frac[1] * min(spec.width, spec.height)
    for class_id in Z_ORDER:
        count_range = spec.blob_counts.get(class_id, (0, 0))
        for _ in range(int(rng.integers(count_range[0], count_range[1] + 1))):
            _paint_ellipse(canvas, rng, class_id, (lo, hi))
    return ClassMap(canvas)


def apply_section_noise(
    truth: ClassMap, sections: SectionMask, noise: float, rng: np.random.Generator
) -> ClassMap:
    """Flip pixels to random other classes, a strict minority in every section."""
    labels = truth.labels.copy()
    if noise == 0.0:
        return ClassMap(labels)
    flat_sec = sections.sections.ravel().astype(np.int64)
    flip = rng.random(labels.size) < noise

    sizes = np.bincount(flat_sec, minlength=sections.n_sections)
    flips_per_sec = np.bincount(flat_sec, weights=flip.astype(np.float64), minlength=sections.n_sections).astype(np.int64)
    max_allowed = (sizes - 1) // 2
    for sec in np.nonzero(flips_per_sec > max_allowed)[0]:
        members = np.nonzero(flip & (flat_sec == sec))[0]
        keep = rng.choice(members, size=int(max_allowed[sec]), replace=False)
        flip[members] = False
        flip[keep] = True

    flat = labels.ravel()
    idx = np.nonzero(flip)[0]
    offsets = rng.integers(0, N_CLASSES - 1, size=len(idx))
    flat[idx] = (flat[idx].astype(np.int64) + 1 + offsets) % N_CLASSES
    return ClassMap(flat.reshape(labels.shape))


def synth_features(truth: ClassMap, rng: np.random.Generator, dim: int = 16) -> np.ndarray:
    """Padded class-histogram feature with small seeded noise."""
    hist = np.bincount(truth.labels.ravel(), minlength=N_CLASSES) / truth.labels.size
    vec = np.zeros(dim, dtype=np.float64)
    vec[:N_CLASSES] = hist
    vec += rng.normal(0.0, 0.01, size=dim)
    return vec.astype(np.float32)


@dataclass(frozen=True)
class SyntheticFrame:
    ref: FrameRef
    truth_map: ClassMap
    truth_sections: SectionMask
    noisy_map: ClassMap


def generate_frames(spec: SyntheticSpec) -> tuple[list[SyntheticFrame], np.ndarray]:
    """In-memory generation: frames plus the (T, 16) feature matrix."""
    rng = np.random.default_rng(spec.seed)
    video_id = f"synth{spec.seed}"
    frames = []
    feats = np.empty((spec.n_frames, 16), dtype=np.float32)
    for i in range(spec.n_frames):
        truth = synth_truth_map(spec, rng)
        sections = SectionMask(sections_from_class_map(truth.labels))
        noisy = apply_section_noise(truth, sections, spec.noise, rng)
        feats[i] = synth_features(truth, rng)
        frames.append(
            SyntheticFrame(FrameRef(video_id, i, i * 1000), truth, sections, noisy)
        )
    return frames, feats


def generate_synthetic(
    spec: SyntheticSpec, root: str | Path, render_images: bool = True
) -> Project:
    """Generate a full on-disk project from a synthetic spec.

    The stored class maps are the noisy ones (playing the role of model
    predictions); ground truth maps land in truth/ for evaluation. A fixed
    seed reproduces every byte.
    """
    frames, feats = generate_frames(spec)
    project = init_project(root, (spec.width, spec.height))
    video_id = frames[0].ref.video_id
    with project.lock():
        for frame in frames:
            stem = f"{video_id}_{frame.ref.frame_index:06d}"
            _store_frame(
                project,
                frame.ref,
                stem,
                frame.noisy_map,
                frame.truth_sections,
                truth=frame.truth_map,
                render_images=render_images,
            )
        features_rel = f"features_{video_id}.sfv"
        kf.save_features(
            kf.FeatureSeries(feats, kf.default_frame_refs(len(frames), video_id)),
            project.path(features_rel),
        )
        project.features[video_id] = features_rel
        project.videos.append(video_id)
        _write_manifest(project)
    return project
