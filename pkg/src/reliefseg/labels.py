"""Class-tagged polygons and GeoJSON interchange.

Ground truth and predictions travel as polygons in world coordinates
(planar meters). Dataset samples reuse the same container with tile
pixel coordinates; the coordinate frame is determined by context.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

CLASSES = ("platform", "annular")

Ring = NDArray[np.float64]  # (N, 2) closed: first vertex == last vertex


def _close_ring(vertices) -> Ring:
    ring = np.asarray(vertices, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise ValueError(f"ring must be an (N, 2) vertex list, got shape {ring.shape}")
    if len(ring) == 0:
        raise ValueError("empty ring")
    if not np.array_equal(ring[0], ring[-1]):
        ring = np.vstack([ring, ring[:1]])
    return ring


def distinct_vertex_count(ring: Ring) -> int:
    return len(np.unique(np.asarray(ring)[:-1], axis=0))


@dataclass(frozen=True)
class LabelledPolygon:
    """One labeled object: outer ring plus optional holes.

    Rings are stored closed (first == last vertex). The outer ring must
    have at least 3 distinct vertices; holes are expected to lie inside
    the outer ring (checked on their bounding boxes).
    """

    cls: str
    outer: Ring
    holes: tuple[Ring, ...] = ()
    id: str = ""

    def __post_init__(self) -> None:
        if self.cls not in CLASSES:
            raise ValueError(f"unknown class {self.cls!r}; accepted classes: {', '.join(CLASSES)}")
        outer = _close_ring(self.outer)
        if distinct_vertex_count(outer) < 3:
            raise ValueError(f"outer ring needs >= 3 distinct vertices, got {distinct_vertex_count(outer)}")
        holes = tuple(_close_ring(h) for h in self.holes)
        ox0, oy0, ox1, oy1 = _ring_bounds(outer)
        for h in holes:
            hx0, hy0, hx1, hy1 = _ring_bounds(h)
            if hx0 < ox0 or hy0 < oy0 or hx1 > ox1 or hy1 > oy1:
                raise ValueError("hole extends outside the outer ring bounds")
        for r in (outer, *holes):
            r.setflags(write=False)
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "holes", holes)

    @property
    def rings(self) -> tuple[Ring, ...]:
        return (self.outer, *self.holes)

    def bounds(self) -> tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y) of the outer ring."""
        return _ring_bounds(self.outer)

    def transformed(self, fn) -> "LabelledPolygon":
        """Apply an (N,2)->(N,2) vertex transform to every ring."""
        return LabelledPolygon(
            cls=self.cls,
            outer=fn(np.array(self.outer)),
            holes=tuple(fn(np.array(h)) for h in self.holes),
            id=self.id,
        )


def _ring_bounds(ring: Ring) -> tuple[float, float, float, float]:
    v = np.asarray(ring)
    return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())


# ---------------------------------------------------------------------------
# Ring geometry helpers
# ---------------------------------------------------------------------------


def shoelace_area(ring: Ring) -> float:
    """Unsigned shoelace area of a closed ring."""
    v = np.asarray(ring, dtype=np.float64)
    x, y = v[:-1, 0], v[:-1, 1]
    xn, yn = v[1:, 0], v[1:, 1]
    return abs(float(np.sum(x * yn - xn * y))) / 2.0


def ring_self_intersects(ring: Ring) -> bool:
    """True if any two non-adjacent segments properly cross.

    Shared endpoints (e.g. rings pinched at a vertex) do not count as
    crossings; only transversal interior intersections do. The all-pairs
    orientation test runs in segment chunks to bound memory on long
    traced rings.
    """
    v = np.asarray(ring, dtype=np.float64)
    a = v[:-1]
    b = v[1:]
    n = len(a)
    if n < 4:
        return False

    def orient(px, py, qx, qy, rx, ry):
        return (qx - px) * (ry - py) - (qy - py) * (rx - px)

    cx, cy = a[:, 0][None, :], a[:, 1][None, :]
    dx, dy = b[:, 0][None, :], b[:, 1][None, :]
    idx = np.arange(n)
    chunk = 512
    for start in range(0, n, chunk):
        rows = slice(start, min(start + chunk, n))
        ax, ay = a[rows, 0][:, None], a[rows, 1][:, None]
        bx, by = b[rows, 0][:, None], b[rows, 1][:, None]
        o1 = orient(ax, ay, bx, by, cx, cy)
        o2 = orient(ax, ay, bx, by, dx, dy)
        o3 = orient(cx, cy, dx, dy, ax, ay)
        o4 = orient(cx, cy, dx, dy, bx, by)
        proper = (o1 * o2 < 0) & (o3 * o4 < 0)
        gap = np.abs(idx[rows][:, None] - idx[None, :])
        adjacent = (gap <= 1) | (gap == n - 1)
        if bool(np.any(proper & ~adjacent)):
            return True
    return False


def polygon_bbox_size(poly: LabelledPolygon) -> tuple[float, float]:
    """(width, height) of the outer-ring bounding box."""
    x0, y0, x1, y1 = poly.bounds()
    return x1 - x0, y1 - y0


def clip_ring_to_rect(ring: Ring, x0: float, y0: float, x1: float, y1: float) -> Ring | None:
    """Sutherland-Hodgman clip of a closed ring against an axis-aligned rect.

    Returns a closed ring, or None when nothing remains. Concave rings
    that the rectangle splits come back as one ring with zero-width
    bridges, which downstream even-odd rasterization and bbox logic
    handle correctly.
    """
    verts = [tuple(p) for p in np.asarray(ring)[:-1]]

    def clip_edge(points, inside, intersect):
        out = []
        n = len(points)
        for i in range(n):
            cur = points[i]
            prev = points[i - 1]
            cur_in = inside(cur)
            prev_in = inside(prev)
            if cur_in:
                if not prev_in:
                    out.append(intersect(prev, cur))
                out.append(cur)
            elif prev_in:
                out.append(intersect(prev, cur))
        return out

    def x_cut(bound):
        def fn(p, q):
            t = (bound - p[0]) / (q[0] - p[0])
            return (bound, p[1] + t * (q[1] - p[1]))

        return fn

    def y_cut(bound):
        def fn(p, q):
            t = (bound - p[1]) / (q[1] - p[1])
            return (p[0] + t * (q[0] - p[0]), bound)

        return fn

    verts = clip_edge(verts, lambda p: p[0] >= x0, x_cut(x0))
    if verts:
        verts = clip_edge(verts, lambda p: p[0] <= x1, x_cut(x1))
    if verts:
        verts = clip_edge(verts, lambda p: p[1] >= y0, y_cut(y0))
    if verts:
        verts = clip_edge(verts, lambda p: p[1] <= y1, y_cut(y1))
    if len(verts) < 3:
        return None
    out = np.array(verts + [verts[0]], dtype=np.float64)
    if len(np.unique(out[:-1], axis=0)) < 3 or shoelace_area(out) == 0.0:
        return None
    return out


def clip_polygon_to_rect(
    poly: LabelledPolygon, x0: float, y0: float, x1: float, y1: float
) -> LabelledPolygon | None:
    """Clip outer ring and holes to a rectangle; None if nothing remains.

    Holes whose clipped extent no longer fits inside the clipped outer
    ring's bounds (possible when the rectangle cuts a concave outer) are
    dropped rather than kept as invalid geometry.
    """
    outer = clip_ring_to_rect(poly.outer, x0, y0, x1, y1)
    if outer is None:
        return None
    ox0, oy0, ox1, oy1 = _ring_bounds(outer)
    holes = []
    for h in poly.holes:
        clipped = clip_ring_to_rect(h, x0, y0, x1, y1)
        if clipped is None:
            continue
        hx0, hy0, hx1, hy1 = _ring_bounds(clipped)
        if hx0 >= ox0 and hy0 >= oy0 and hx1 <= ox1 and hy1 <= oy1:
            holes.append(clipped)
    return LabelledPolygon(cls=poly.cls, outer=outer, holes=tuple(holes), id=poly.id)


# ---------------------------------------------------------------------------
# GeoJSON interchange
# ---------------------------------------------------------------------------


def load_geojson_labels(text: str) -> list[LabelledPolygon]:
    """Parse a GeoJSON FeatureCollection into labeled polygons.

    Every feature needs a "class" property of "platform" or "annular"
    and Polygon or MultiPolygon geometry; MultiPolygon parts become
    separate instances sharing the class. Coordinates are taken as
    planar meters (no reprojection).
    """
    doc = json.loads(text)
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"expected a FeatureCollection, got type {doc.get('type')!r}")
    polygons: list[LabelledPolygon] = []
    for fi, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        cls = props.get("class")
        if cls not in CLASSES:
            raise ValueError(
                f"feature {fi}: unknown class {cls!r}; accepted classes: {', '.join(CLASSES)}"
            )
        fid = str(props.get("id", f"feature-{fi}"))
        geom = feature.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates")
        if gtype == "Polygon":
            parts = [coords]
        elif gtype == "MultiPolygon":
            parts = list(coords)
        else:
            raise ValueError(f"feature {fi}: geometry type {gtype!r} is not Polygon/MultiPolygon")
        for pi, rings in enumerate(parts):
            pid = fid if len(parts) == 1 else f"{fid}-part{pi}"
            outer = np.asarray(rings[0], dtype=np.float64)
            if distinct_vertex_count(_close_ring(outer)) < 3:
                raise ValueError(f"feature {fi}: ring with fewer than 3 distinct vertices")
            holes = tuple(np.asarray(r, dtype=np.float64) for r in rings[1:])
            polygons.append(LabelledPolygon(cls=cls, outer=outer, holes=holes, id=pid))
    return polygons


def dump_geojson_labels(polygons: list[LabelledPolygon], extra_properties=None) -> str:
    """Serialize polygons as a FeatureCollection with class/id properties.

    ``extra_properties`` maps polygon id to a dict of additional
    properties (e.g. computed areas for predictions).
    """
    features = []
    for poly in polygons:
        props = {"class": poly.cls, "id": poly.id}
        if extra_properties and poly.id in extra_properties:
            props.update(extra_properties[poly.id])
        rings = [np.asarray(r).tolist() for r in poly.rings]
        features.append(
            {"type": "Feature", "properties": props, "geometry": {"type": "Polygon", "coordinates": rings}}
        )
    return json.dumps({"type": "FeatureCollection", "features": features}, sort_keys=True)
