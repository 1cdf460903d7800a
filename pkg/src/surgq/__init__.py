"""surgq: segmentation fusion, mask-based frame search, and quiz authoring.

The engine ingests pre-computed per-pixel class predictions and unlabeled
section masks for surgical video frames, fuses them into accurate labeled
scenes, retrieves frames by user-edited polygon compositions, and backs an
authoring service for image-based quiz questions with region-anchored
feedback.
"""

from . import corpus, errors, fusion, geometry, keyframes, metrics, quiz, scene, search
from .errors import SurgqError
from .fusion import SceneFuser, fuse
from .geometry import PolygonExtractor, extract_polygons, rasterize
from .keyframes import KeyframeDetector
from .metrics import dice, dice_report
from .scene import ClassMap, FrameRef, FusedScene, SectionMask, validate_pair
from .search import FrameSearchIndex, build_index, map_distance

__version__ = "0.1.0"

__all__ = [
    "corpus",
    "errors",
    "fusion",
    "geometry",
    "keyframes",
    "metrics",
    "quiz",
    "scene",
    "search",
    "SurgqError",
    "ClassMap",
    "SectionMask",
    "FusedScene",
    "FrameRef",
    "validate_pair",
    "fuse",
    "SceneFuser",
    "KeyframeDetector",
    "extract_polygons",
    "rasterize",
    "PolygonExtractor",
    "map_distance",
    "build_index",
    "FrameSearchIndex",
    "dice",
    "dice_report",
    "__version__",
]
