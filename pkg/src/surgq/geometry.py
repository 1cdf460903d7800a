"""Editable polygon layer over fused scenes.

A fused scene is converted into a stack of z-ordered component polygons that
a user can move, resize, rotate, and reshape; the edited stack rasterizes
back into a class map that drives search. Boundaries are traced along pixel
edges (so an unedited extraction refills exactly), organ classes that may be
fragmented by tools are unioned through an alpha shape, and rings are
thinned with farthest-point simplification to stay editable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DegenerateRing, InvalidClassId, InvalidGrid
from .scene import (
    BLOOD,
    FAT,
    GALLBLADDER,
    GI_TRACT,
    LIVER,
    TOOL,
    ClassMap,
    FusedScene,
)

# Paint order, bottom to top. Background and Abdominal Wall are backdrop,
# Connected Tissue stays in the backdrop as well (no stable outline to edit).
Z_ORDER = (LIVER, GALLBLADDER, FAT, GI_TRACT, BLOOD, TOOL)
Z_RANK = {c: i for i, c in enumerate(Z_ORDER)}

# Classes whose fragments are rendered as one unioned piece.
UNIONED_CLASSES = frozenset({LIVER, GALLBLADDER})

DEFAULT_EPSILON = 2.0
DEFAULT_MIN_AREA_FRAC = 0.001
DEFAULT_BOUNDARY_STRIDE = 4
DEFAULT_ALPHA_RADIUS = 8.0


@dataclass(frozen=True)
class ComponentPolygon:
    """One editable component: a closed vertex ring with a class and paint mode."""

    class_id: int
    ring: np.ndarray  # shape (V, 2) float64, implicit last->first edge
    source_section: int | None = None
    piece_mode: str = "separate"  # "separate" | "unioned"

    def __post_init__(self):
        if self.class_id not in Z_RANK:
            raise InvalidClassId(self.class_id)
        ring = np.asarray(self.ring, dtype=np.float64)
        if ring.ndim != 2 or ring.shape[1] != 2 or ring.shape[0] < 3:
            raise DegenerateRing(f"ring needs >= 3 (x, y) vertices, got shape {ring.shape}")
        ring = ring.copy()
        ring.setflags(write=False)
        object.__setattr__(self, "ring", ring)

    @property
    def n_vertices(self) -> int:
        return self.ring.shape[0]

    def centroid(self) -> np.ndarray:
        """Area centroid of the ring; falls back to vertex mean when degenerate."""
        x, y = self.ring[:, 0], self.ring[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        area2 = cross.sum()
        if abs(area2) < 1e-12:
            return self.ring.mean(axis=0)
        cx = ((x + xn) * cross).sum() / (3 * area2)
        cy = ((y + yn) * cross).sum() / (3 * area2)
        return np.array([cx, cy])


@dataclass(frozen=True)
class PolygonScene:
    """Z-ordered polygons over a canvas; list order is paint order."""

    canvas_width: int
    canvas_height: int
    polygons: tuple[ComponentPolygon, ...]

    def __post_init__(self):
        if self.canvas_width < 1 or self.canvas_height < 1:
            raise InvalidGrid(f"canvas {self.canvas_width}x{self.canvas_height}")
        polys = tuple(self.polygons)
        ranks = [Z_RANK[p.class_id] for p in polys]
        if any(a > b for a, b in zip(ranks, ranks[1:])):
            raise InvalidGrid("polygon paint order violates the class z-order")
        w, h = self.canvas_width, self.canvas_height
        for i, p in enumerate(polys):
            x, y = p.ring[:, 0], p.ring[:, 1]
            if (x < -0.5 * w).any() or (x > 1.5 * w).any() or (y < -0.5 * h).any() or (y > 1.5 * h).any():
                raise InvalidGrid(f"polygon {i} drags beyond the 0.5x-canvas margin")
        object.__setattr__(self, "polygons", polys)

    def replace_polygon(self, index: int, polygon: ComponentPolygon) -> "PolygonScene":
        polys = list(self.polygons)
        polys[index] = polygon
        return PolygonScene(self.canvas_width, self.canvas_height, tuple(polys))


# ---------------------------------------------------------------------------
# Boundary tracing. Loops run along pixel edges in corner coordinates, so a
# traced region refills exactly under even-odd rasterization at pixel centers.

_RIGHT_TURN = {(1, 0): (0, 1), (0, 1): (-1, 0), (-1, 0): (0, -1), (0, -1): (1, 0)}
_LEFT_TURN = {v: k for k, v in _RIGHT_TURN.items()}


def trace_boundary_loops(mask: np.ndarray) -> list[np.ndarray]:
    """Closed boundary loops of the true region, dense corner coordinates.

    Outer loops come back with positive signed area, holes negative. At
    corners where two pixels touch only diagonally the walk turns toward its
    own pixel (right turn), keeping 4-connected components separate.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask

    edges: dict[tuple[int, int], list[tuple[tuple[int, int], tuple[int, int]]]] = {}

    def add_edges(rows, cols, start_off, direction):
        for r, c in zip(rows, cols):
            start = (c + start_off[0], r + start_off[1])
            edges.setdefault(start, []).append(
                ((start[0] + direction[0], start[1] + direction[1]), direction)
            )

    inside = padded[1:-1, 1:-1]
    top = inside & ~padded[:-2, 1:-1]
    bottom = inside & ~padded[2:, 1:-1]
    left = inside & ~padded[1:-1, :-2]
    right = inside & ~padded[1:-1, 2:]
    add_edges(*np.nonzero(top), (0, 0), (1, 0))
    add_edges(*np.nonzero(right), (1, 0), (0, 1))
    add_edges(*np.nonzero(bottom), (1, 1), (-1, 0))
    add_edges(*np.nonzero(left), (0, 1), (0, -1))

    visited: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    loops = []
    for start_point, candidates in edges.items():
        for end0, dir0 in candidates:
            if (start_point, end0) in visited:
                continue
            loop = [start_point]
            point, direction = end0, dir0
            visited.add((start_point, end0))
            while point != start_point:
                loop.append(point)
                options = edges[point]
                if len(options) == 1:
                    nxt = options[0]
                else:
                    # diagonal-touch corner: sharpest right turn first
                    prefer = (_RIGHT_TURN[direction], direction, _LEFT_TURN[direction])
                    nxt = min(options, key=lambda o: prefer.index(o[1]))
                visited.add((point, nxt[0]))
                point, direction = nxt
            loops.append(np.array(loop, dtype=np.float64))
    return loops


def signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return float((x * np.roll(y, -1) - np.roll(x, -1) * y).sum() / 2.0)


def _merge_collinear(ring: np.ndarray) -> np.ndarray:
    """Drop vertices lying exactly on the segment between their neighbors."""
    prev = np.roll(ring, 1, axis=0)
    nxt = np.roll(ring, -1, axis=0)
    cross = (ring[:, 0] - prev[:, 0]) * (nxt[:, 1] - prev[:, 1]) - (
        ring[:, 1] - prev[:, 1]
    ) * (nxt[:, 0] - prev[:, 0])
    keep = cross != 0
    return ring[keep] if keep.sum() >= 3 else ring


def _outer_loop(mask: np.ndarray) -> np.ndarray | None:
    """Largest outer boundary loop of the region, or None if empty."""
    loops = [l for l in trace_boundary_loops(mask) if signed_area(l) > 0]
    if not loops:
        return None
    return max(loops, key=signed_area)


# ---------------------------------------------------------------------------
# Ring simplification (recursive farthest-point, closed-ring variant).

def _point_segment_dist(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def _douglas_peucker(chain: np.ndarray, epsilon: float) -> np.ndarray:
    if len(chain) <= 2:
        return chain
    dist = _point_segment_dist(chain[1:-1], chain[0], chain[-1])
    i = int(np.argmax(dist)) + 1
    if dist[i - 1] <= epsilon:
        return chain[[0, -1]]
    head = _douglas_peucker(chain[: i + 1], epsilon)
    tail = _douglas_peucker(chain[i:], epsilon)
    return np.vstack([head[:-1], tail])


def simplify_ring(ring: np.ndarray, epsilon: float) -> np.ndarray:
    """Thin a closed ring; every dropped vertex stays within epsilon of the result.

    The ring is split at vertex 0 and the vertex farthest from it, and each
    open chain is simplified independently. epsilon 0 returns the ring as is.
    """
    ring = np.asarray(ring, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[0] < 3:
        raise DegenerateRing(f"ring needs >= 3 vertices, got shape {ring.shape}")
    if epsilon == 0:
        return ring
    split = int(np.argmax(np.linalg.norm(ring - ring[0], axis=1)))
    if split == 0:
        raise DegenerateRing("all ring vertices coincide")
    closed = np.vstack([ring, ring[:1]])
    first = _douglas_peucker(closed[: split + 1], epsilon)
    second = _douglas_peucker(closed[split:], epsilon)
    out = np.vstack([first[:-1], second[:-1]])
    if out.shape[0] < 3:
        raise DegenerateRing(f"simplification collapsed ring to {out.shape[0]} vertices")
    return out


# ---------------------------------------------------------------------------
# Alpha shape of boundary samples, used to union fragmented organ pieces.

def _triangle_circumradius(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a = pts[tris[:, 0]]
    b = pts[tris[:, 1]]
    c = pts[tris[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(a - c, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    area = np.abs(cross) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = la * lb * lc / (4.0 * area)
    r[area == 0] = np.inf
    return r


def _chain_undirected(edges: set[frozenset]) -> list[list[int]] | None:
    """Chain undirected edges into simple cycles; None if any vertex degree != 2."""
    adj: dict[int, list[int]] = {}
    for e in edges:
        u, v = tuple(e)
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    if any(len(vs) != 2 for vs in adj.values()):
        return None
    loops = []
    seen: set[int] = set()
    for start in adj:
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            a, b = adj[cur]
            nxt = b if a == prev else a
            if nxt == start:
                break
            loop.append(nxt)
            seen.add(nxt)
            prev, cur = cur, nxt
        loops.append(loop)
    return loops


def alpha_shape_ring(points: np.ndarray, alpha_radius: float) -> np.ndarray | None:
    """Outer ring of the alpha complex of a point set.

    Keeps Delaunay triangles with circumradius <= alpha_radius and returns
    the boundary of their union. Returns None when the complex is empty,
    disconnected, or non-manifold - callers fall back to the convex hull.
    """
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 3:
        return None
    try:
        tri = Delaunay(points)
    except QhullError:
        return None
    tris = tri.simplices
    keep = _triangle_circumradius(points, tris) <= alpha_radius
    tris = tris[keep]
    if len(tris) == 0:
        return None

    # connectivity over kept triangles via shared edges
    edge_owner: dict[frozenset, list[int]] = {}
    for t_idx, t in enumerate(tris):
        for i in range(3):
            e = frozenset((int(t[i]), int(t[(i + 1) % 3])))
            edge_owner.setdefault(e, []).append(t_idx)
    uf = list(range(len(tris)))

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    for owners in edge_owner.values():
        for other in owners[1:]:
            ra, rb = find(owners[0]), find(other)
            if ra != rb:
                uf[rb] = ra
    if len({find(i) for i in range(len(tris))}) > 1:
        return None

    boundary = {e for e, owners in edge_owner.items() if len(owners) == 1}
    loops = _chain_undirected(boundary)
    if not loops:
        return None
    rings = [points[np.array(loop)] for loop in loops]
    outer = max(rings, key=lambda r: abs(signed_area(r)))
    if signed_area(outer) < 0:
        outer = outer[::-1]
    return outer


def _convex_hull_ring(points: np.ndarray) -> np.ndarray | None:
    try:
        hull = ConvexHull(points)
    except QhullError:
        return None
    return points[hull.vertices]


# ---------------------------------------------------------------------------
# Extraction and rasterization.

def extract_polygons(
    scene: FusedScene,
    epsilon: float = DEFAULT_EPSILON,
    min_area_frac: float = DEFAULT_MIN_AREA_FRAC,
    boundary_stride: int = DEFAULT_BOUNDARY_STRIDE,
    alpha_radius: float = DEFAULT_ALPHA_RADIUS,
) -> PolygonScene:
    """Build the editable polygon stack for a fused scene.

    Fat, G.I. Tract, Blood, and Tool sections each become their own polygon;
    Liver and Gallbladder sections are unioned into a single piece per class.
    Sections below min_area_frac of the frame are dropped as clutter.
    """
    min_area = min_area_frac * scene.width * scene.height
    sections = scene.section_mask.sections
    labels = scene.class_map.labels
    polygons: list[ComponentPolygon] = []

    for class_id in Z_ORDER:
        keep_ids = [
            rec.section_id
            for rec in scene.section_table
            if rec.class_id == class_id and rec.pixel_count >= min_area
        ]
        if not keep_ids:
            continue
        if class_id in UNIONED_CLASSES:
            union = np.isin(sections, keep_ids) & (labels == class_id)
            ring = _unioned_ring(union, boundary_stride, alpha_radius)
            if ring is None:
                continue
            # anchor the unioned piece to its largest constituent section so
            # hover/feedback flows still resolve to a concrete region
            largest = max(
                keep_ids,
                key=lambda sid: scene.section_table[sid].pixel_count,
            )
            polygons.append(
                ComponentPolygon(class_id, _safe_simplify(ring, epsilon), largest, "unioned")
            )
        else:
            for sec_id in keep_ids:
                loop = _outer_loop(sections == sec_id)
                if loop is None:
                    continue
                ring = _merge_collinear(loop)
                polygons.append(
                    ComponentPolygon(class_id, _safe_simplify(ring, epsilon), sec_id, "separate")
                )
    return PolygonScene(scene.width, scene.height, tuple(polygons))


def _safe_simplify(ring: np.ndarray, epsilon: float) -> np.ndarray:
    try:
        return simplify_ring(ring, epsilon)
    except DegenerateRing:
        return ring


def _unioned_ring(mask: np.ndarray, stride: int, alpha_radius: float) -> np.ndarray | None:
    """Alpha-shape ring over stride-sampled boundary points of a class union."""
    if not mask.any():
        return None
    samples = []
    for loop in trace_boundary_loops(mask):
        if signed_area(loop) > 0:
            samples.append(loop[::stride])
    if not samples:
        return None
    points = np.unique(np.vstack(samples), axis=0)
    ring = alpha_shape_ring(points, alpha_radius)
    if ring is None:
        ring = _convex_hull_ring(points)
    if ring is None or len(ring) < 3:
        return None
    return ring


def rasterize(scene: PolygonScene) -> ClassMap:
    """Paint the polygon stack into a class map.

    Painter's algorithm in list order; membership is the even-odd rule tested
    at pixel centers; anything uncovered stays Background. Off-canvas parts
    simply clip away.
    """
    h, w = scene.canvas_height, scene.canvas_width
    canvas = np.zeros((h, w), dtype=np.uint8)
    for poly in scene.polygons:
        inside = _fill_even_odd(poly.ring, w, h)
        canvas[inside] = poly.class_id
    return ClassMap(canvas)


def _fill_even_odd(ring: np.ndarray, w: int, h: int) -> np.ndarray:
    """Even-odd interior mask of a ring at pixel centers (x+0.5, y+0.5)."""
    x0, y0 = ring[:, 0], ring[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    nonhoriz = y0 != y1
    x0, y0, x1, y1 = x0[nonhoriz], y0[nonhoriz], x1[nonhoriz], y1[nonhoriz]
    if len(x0) == 0:
        return np.zeros((h, w), dtype=bool)

    rows = np.arange(h, dtype=np.float64) + 0.5
    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    # half-open span [ylo, yhi) makes shared vertices count once
    crossing = (rows[:, None] >= ylo[None, :]) & (rows[:, None] < yhi[None, :])
    r_idx, e_idx = np.nonzero(crossing)
    if len(r_idx) == 0:
        return np.zeros((h, w), dtype=bool)
    t = (rows[r_idx] - y0[e_idx]) / (y1[e_idx] - y0[e_idx])
    xs = x0[e_idx] + t * (x1[e_idx] - x0[e_idx])

    # crossing at x toggles parity for every pixel center right of x
    col_start = np.ceil(xs - 0.5).astype(np.int64)
    valid = col_start < w
    col_start = np.maximum(col_start[valid], 0)
    buf = np.zeros((h, w + 1), dtype=np.int64)
    np.add.at(buf, (r_idx[valid], col_start), 1)
    return (np.cumsum(buf[:, :-1], axis=1) % 2).astype(bool)


def transform_polygon(polygon: ComponentPolygon, op: str, **params) -> ComponentPolygon:
    """Apply one edit gesture; class and piece mode never change.

    Ops: translate(dx, dy); scale(factor | fx, fy) about the centroid;
    rotate(degrees) about the centroid; move_vertex(index, x, y).
    """
    ring = polygon.ring
    if op == "translate":
        delta = np.array([params["dx"], params["dy"]], dtype=np.float64)
        new_ring = ring + delta
    elif op == "scale":
        fx = params.get("fx", params.get("factor", 1.0))
        fy = params.get("fy", params.get("factor", fx))
        center = polygon.centroid()
        new_ring = (ring - center) * np.array([fx, fy]) + center
    elif op == "rotate":
        theta = math.radians(params["degrees"])
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        rot = np.array([[cos_t, -sin_t], [sin_t, cos_t]])
        center = polygon.centroid()
        new_ring = (ring - center) @ rot.T + center
    elif op == "move_vertex":
        idx = params["index"]
        new_ring = ring.copy()
        new_ring[idx] = (params["x"], params["y"])
        if len(np.unique(new_ring, axis=0)) < 3:
            raise DegenerateRing("vertex edit collapsed the ring below 3 distinct points")
    else:
        raise ValueError(f"unknown transform op {op!r}")
    return replace(polygon, ring=new_ring)


class PolygonExtractor(BaseEstimator, TransformerMixin):
    """Estimator wrapper around `extract_polygons` for pipeline use."""

    def __init__(
        self,
        epsilon: float = DEFAULT_EPSILON,
        min_area_frac: float = DEFAULT_MIN_AREA_FRAC,
        boundary_stride: int = DEFAULT_BOUNDARY_STRIDE,
        alpha_radius: float = DEFAULT_ALPHA_RADIUS,
    ):
        self.epsilon = epsilon
        self.min_area_frac = min_area_frac
        self.boundary_stride = boundary_stride
        self.alpha_radius = alpha_radius

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[PolygonScene]:
        return [
            extract_polygons(
                scene,
                epsilon=self.epsilon,
                min_area_frac=self.min_area_frac,
                boundary_stride=self.boundary_stride,
                alpha_radius=self.alpha_radius,
            )
            for scene in X
        ]


# ---------------------------------------------------------------------------
# Wire format: {"canvas": {"width", "height"}, "polygons": [{"class", "vertices"}]}

def scene_to_wire(scene: PolygonScene) -> dict:
    out = []
    for p in scene.polygons:
        entry = {
            "class": p.class_id,
            "vertices": [[float(x), float(y)] for x, y in p.ring],
        }
        if p.source_section is not None:
            entry["section"] = p.source_section
        out.append(entry)
    return {
        "canvas": {"width": scene.canvas_width, "height": scene.canvas_height},
        "polygons": out,
    }


def scene_from_wire(data: dict) -> PolygonScene:
    canvas = data["canvas"]
    polygons = tuple(
        ComponentPolygon(
            int(p["class"]),
            np.array(p["vertices"], dtype=np.float64),
            source_section=p.get("section"),
        )
        for p in data["polygons"]
    )
    return PolygonScene(int(canvas["width"]), int(canvas["height"]), polygons)
