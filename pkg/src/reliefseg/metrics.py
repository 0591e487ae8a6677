"""Evaluation: pixel metrics, mask vectorization, object topology, quartiles.

Pixel scoring is plain TP/FP/FN counting. Object-level scoring mirrors
how survey archaeologists check results in GIS: predicted masks are
vectorized to polygons and intersected with ground-truth polygons in
both directions (matches are not always 1:1), then ground truth is
sorted by area into quartiles to show where the failures live.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.strtree import STRtree

from .dataset import rasterize_polygons
from .grid import BinaryMask, GridGeometry
from .labels import CLASSES, LabelledPolygon, ring_self_intersects, shoelace_area

# ---------------------------------------------------------------------------
# Pixel metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class PixelMetrics:
    """IoU / precision / recall; None marks an undefined (0/0) ratio.

    Undefined ratios are reported explicitly rather than coerced to 0
    or 1 so empty-vs-empty comparisons cannot inflate scores.
    """

    iou: float | None
    precision: float | None
    recall: float | None


def pixel_metrics(pred: BinaryMask, gt: BinaryMask) -> tuple[PixelMetrics, EvalCounts]:
    """Exact per-pixel counting of one predicted mask against ground truth."""
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise ValueError(
            f"mask dimensions differ: {pred.width}x{pred.height} vs {gt.width}x{gt.height}"
        )
    p = pred.pixels
    g = gt.pixels
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    counts = EvalCounts(tp=tp, fp=fp, fn=fn)
    union = tp + fp + fn
    metrics = PixelMetrics(
        iou=tp / union if union else None,
        precision=tp / (tp + fp) if tp + fp else None,
        recall=tp / (tp + fn) if tp + fn else None,
    )
    return metrics, counts


# ---------------------------------------------------------------------------
# Mask vectorization (lattice contour tracing)
# ---------------------------------------------------------------------------

_DIR_VECS = {"E": (1, 0), "S": (0, 1), "W": (-1, 0), "N": (0, -1)}
_RIGHT_TURN = {"E": "S", "S": "W", "W": "N", "N": "E"}


def _boundary_edges(pixels: np.ndarray):
    """Directed boundary edges of the positive region, interior on the left.

    Each edge is (start_vertex, direction, interior_pixel); vertices are
    pixel-corner lattice points (x, y) with y down.
    """
    padded = np.pad(pixels, 1, constant_values=False)
    edges = []
    sides = (
        (padded[:-2, 1:-1], "W", lambda r, c: (c + 1, r)),  # open boundary to the north
        (padded[2:, 1:-1], "E", lambda r, c: (c, r + 1)),  # south
        (padded[1:-1, 2:], "N", lambda r, c: (c + 1, r + 1)),  # east
        (padded[1:-1, :-2], "S", lambda r, c: (c, r)),  # west
    )
    for neighbor, direction, start in sides:
        rows, cols = np.nonzero(pixels & ~neighbor)
        for r, c in zip(rows.tolist(), cols.tolist()):
            edges.append((start(r, c), direction, (r, c)))
    return edges


def _trace_cycles(edges):
    """Stitch directed edges into closed cycles.

    At pinch vertices (two incoming, two outgoing) the traversal takes
    the right turn, which keeps diagonally touching positive pixels on
    one ring (8-connected foreground) and separates the background
    (4-connected holes).
    """
    outgoing: dict[tuple[int, int], dict[str, int]] = {}
    for idx, (start, direction, _interior) in enumerate(edges):
        outgoing.setdefault(start, {})[direction] = idx

    def next_edge(vertex, incoming_dir):
        options = outgoing[vertex]
        if len(options) == 1:
            return next(iter(options.values()))
        return options[_RIGHT_TURN[incoming_dir]]

    used = [False] * len(edges)
    cycles = []
    for start_idx in range(len(edges)):
        if used[start_idx]:
            continue
        verts = []
        idx = start_idx
        while True:
            start, direction, _ = edges[idx]
            used[idx] = True
            verts.append(start)
            vec = _DIR_VECS[direction]
            nxt_vertex = (start[0] + vec[0], start[1] + vec[1])
            nxt = next_edge(nxt_vertex, direction)
            if nxt == start_idx:
                break
            idx = nxt
        cycles.append((verts, start_idx))
    return cycles


def _simplify_collinear(verts: list[tuple[int, int]]) -> np.ndarray:
    """Drop intermediate vertices of straight runs; returns a closed ring."""
    n = len(verts)
    keep = []
    for i in range(n):
        prev = verts[(i - 1) % n]
        cur = verts[i]
        nxt = verts[(i + 1) % n]
        if (cur[0] - prev[0], cur[1] - prev[1]) != (nxt[0] - cur[0], nxt[1] - cur[1]):
            keep.append(cur)
    keep.append(keep[0])
    return np.array(keep, dtype=np.float64)


def _signed_area(ring: np.ndarray) -> float:
    x, y = ring[:-1, 0], ring[:-1, 1]
    xn, yn = ring[1:, 0], ring[1:, 1]
    return float(np.sum(x * yn - xn * y)) / 2.0


def vectorize_mask(
    mask: BinaryMask,
    geometry: GridGeometry | None = None,
    cls: str = "platform",
    id_prefix: str = "pred",
) -> list[LabelledPolygon]:
    """Convert a mask to polygons: one per 8-connected component.

    Rings are traced along the pixel-boundary lattice (vertices at
    pixel corners), so each polygon's area is exactly its pixel count
    times the cell area and rasterizing the result reproduces the mask
    bit for bit. Enclosed background regions become inner rings. With a
    ``geometry`` the vertices are expressed in world coordinates;
    otherwise they stay in pixel coordinates.
    """
    pixels = mask.pixels
    if not pixels.any():
        return []
    off_c, off_r = mask.window if mask.window else (0, 0)
    labels, _count = ndimage.label(pixels, structure=np.ones((3, 3), dtype=bool))
    edges = _boundary_edges(pixels)
    cycles = _trace_cycles(edges)

    by_component: dict[int, dict[str, list]] = {}
    for verts, first_edge in cycles:
        interior = edges[first_edge][2]
        label = int(labels[interior])
        ring = _simplify_collinear(verts)
        area = _signed_area(ring)
        slot = by_component.setdefault(label, {"outer": [], "holes": []})
        # interior-on-left tracing winds outer rings one way, holes the other
        if area < 0:
            slot["outer"].append(ring)
        else:
            slot["holes"].append(ring)

    def to_world(ring: np.ndarray) -> np.ndarray:
        out = ring.copy()
        out[:, 0] += off_c
        out[:, 1] += off_r
        if geometry is not None:
            x = geometry.origin_x + out[:, 0] * geometry.cell_size
            y = geometry.origin_y - out[:, 1] * geometry.cell_size
            out = np.stack([x, y], axis=1)
        return out

    polygons = []
    for label in sorted(by_component):
        slot = by_component[label]
        if len(slot["outer"]) != 1:
            raise AssertionError(
                f"component {label} traced {len(slot['outer'])} outer rings"
            )
        polygons.append(
            LabelledPolygon(
                cls=cls,
                outer=to_world(slot["outer"][0]),
                holes=tuple(to_world(h) for h in slot["holes"]),
                id=f"{id_prefix}-{label}",
            )
        )
    return polygons


# ---------------------------------------------------------------------------
# Polygon measures
# ---------------------------------------------------------------------------


def polygon_area(poly: LabelledPolygon, validate: bool = True) -> float:
    """Shoelace area of the outer ring minus hole areas, in world units.

    With ``validate`` (default) rings with proper self-crossings are
    rejected; rings that merely touch themselves at vertices (pinched
    lattice rings) pass.
    """
    if validate:
        for ring in poly.rings:
            if ring_self_intersects(ring):
                raise ValueError(f"polygon {poly.id!r} has a self-intersecting ring")
    area = shoelace_area(poly.outer)
    for hole in poly.holes:
        area -= shoelace_area(hole)
    return area


def _as_shapely(poly: LabelledPolygon):
    geom = ShapelyPolygon(poly.outer, [np.asarray(h) for h in poly.holes])
    if not geom.is_valid:
        geom = shapely.make_valid(geom)
    return geom


def polygons_intersect(a: LabelledPolygon, b: LabelledPolygon) -> bool:
    """True iff the two polygons share interior area (touching is not enough)."""
    return _as_shapely(a).intersection(_as_shapely(b)).area > 0.0


def _hit_flags(
    gts: Sequence[LabelledPolygon], preds: Sequence[LabelledPolygon]
) -> tuple[np.ndarray, np.ndarray]:
    """Which GT polygons touch >= 1 prediction with positive area, and
    vice versa."""
    gt_hit = np.zeros(len(gts), dtype=bool)
    pred_hit = np.zeros(len(preds), dtype=bool)
    if not gts or not preds:
        return gt_hit, pred_hit
    gt_geoms = [_as_shapely(p) for p in gts]
    pred_geoms = [_as_shapely(p) for p in preds]
    tree = STRtree(pred_geoms)
    for gi, geom in enumerate(gt_geoms):
        for pi in tree.query(geom):
            if geom.intersection(pred_geoms[int(pi)]).area > 0.0:
                gt_hit[gi] = True
                pred_hit[int(pi)] = True
    return gt_hit, pred_hit


# ---------------------------------------------------------------------------
# Topology report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassTopology:
    gt_total: int
    gt_intersecting: int
    pred_total: int
    pred_intersecting: int

    def __post_init__(self) -> None:
        if self.gt_intersecting > self.gt_total or self.pred_intersecting > self.pred_total:
            raise ValueError("intersection counts cannot exceed totals")

    @property
    def gt_pct(self) -> float | None:
        return self.gt_intersecting / self.gt_total if self.gt_total else None

    @property
    def pred_pct(self) -> float | None:
        return self.pred_intersecting / self.pred_total if self.pred_total else None

    def as_dict(self) -> dict:
        return {
            "gt_total": self.gt_total,
            "gt_intersecting": self.gt_intersecting,
            "gt_pct": self.gt_pct,
            "pred_total": self.pred_total,
            "pred_intersecting": self.pred_intersecting,
            "pred_pct": self.pred_pct,
        }


def topology_report(
    gt: Sequence[LabelledPolygon], pred: Sequence[LabelledPolygon]
) -> dict[str, ClassTopology]:
    """Both-direction intersection counts, per class.

    Intersections are not always 1:1 (one prediction may cover several
    ground-truth polygons and conversely), so both percentages are
    computed independently.
    """
    report = {}
    for cls in CLASSES:
        gts = [p for p in gt if p.cls == cls]
        preds = [p for p in pred if p.cls == cls]
        if not gts and not preds:
            continue
        gt_hit, pred_hit = _hit_flags(gts, preds)
        report[cls] = ClassTopology(
            gt_total=len(gts),
            gt_intersecting=int(gt_hit.sum()),
            pred_total=len(preds),
            pred_intersecting=int(pred_hit.sum()),
        )
    return report


# ---------------------------------------------------------------------------
# Quartile analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuartileRow:
    quartile: int  # 1..4, or 0 for the overall row
    max_area_m2: float
    size: int
    intersect_count: int

    @property
    def pct(self) -> float | None:
        return self.intersect_count / self.size if self.size else None

    def as_dict(self) -> dict:
        return {
            "quartile": self.quartile,
            "max_area_m2": self.max_area_m2,
            "size": self.size,
            "intersect_count": self.intersect_count,
            "pct": self.pct,
        }


@dataclass(frozen=True)
class QuartileReport:
    rows: tuple[QuartileRow, ...]
    overall: QuartileRow


def quartile_analysis(
    gt: Sequence[LabelledPolygon], pred: Sequence[LabelledPolygon]
) -> QuartileReport:
    """Ground truth sorted ascending by area, split into four groups.

    Group sizes differ by at most one (earlier quartiles take the
    remainder); ties in area order by polygon id so the split is
    deterministic. Each row reports the group's max area and the
    fraction of its polygons intersecting at least one prediction.
    """
    if len(gt) < 4:
        raise ValueError(f"quartile analysis needs >= 4 ground-truth polygons, got {len(gt)}")
    order = sorted(range(len(gt)), key=lambda i: (polygon_area(gt[i], validate=False), gt[i].id))
    gts = [gt[i] for i in order]
    gt_hit, _ = _hit_flags(gts, pred)

    base, remainder = divmod(len(gts), 4)
    sizes = [base + (1 if q < remainder else 0) for q in range(4)]
    rows = []
    start = 0
    for q, size in enumerate(sizes, start=1):
        group = slice(start, start + size)
        areas = [polygon_area(p, validate=False) for p in gts[group]]
        rows.append(
            QuartileRow(
                quartile=q,
                max_area_m2=max(areas),
                size=size,
                intersect_count=int(gt_hit[group].sum()),
            )
        )
        start += size
    overall = QuartileRow(
        quartile=0,
        max_area_m2=rows[-1].max_area_m2,
        size=len(gts),
        intersect_count=int(gt_hit.sum()),
    )
    return QuartileReport(rows=tuple(rows), overall=overall)


# ---------------------------------------------------------------------------
# Combined evaluation report
# ---------------------------------------------------------------------------


def _eval_geometry(polys: Iterable[LabelledPolygon], cell_size: float) -> GridGeometry | None:
    bounds = [p.bounds() for p in polys]
    if not bounds:
        return None
    min_x = min(b[0] for b in bounds)
    min_y = min(b[1] for b in bounds)
    max_x = max(b[2] for b in bounds)
    max_y = max(b[3] for b in bounds)
    origin_x = math.floor(min_x / cell_size) * cell_size - cell_size
    origin_y = math.ceil(max_y / cell_size) * cell_size + cell_size
    width = int(math.ceil((max_x - origin_x) / cell_size)) + 1
    height = int(math.ceil((origin_y - min_y) / cell_size)) + 1
    return GridGeometry(width=width, height=height, cell_size=cell_size, origin_x=origin_x, origin_y=origin_y)


def _pixel_block(pred_mask: BinaryMask, gt_mask: BinaryMask) -> dict:
    metrics, counts = pixel_metrics(pred_mask, gt_mask)
    return {
        "tp": counts.tp,
        "fp": counts.fp,
        "fn": counts.fn,
        "iou": metrics.iou,
        "precision": metrics.precision,
        "recall": metrics.recall,
    }


def build_eval_report(
    gt: Sequence[LabelledPolygon],
    pred: Sequence[LabelledPolygon],
    cell_size: float = 0.5,
    params: dict | None = None,
) -> dict:
    """Full evaluation: pixel metrics (via rasterization at
    ``cell_size``), both-direction topology, and area quartiles, overall
    and per class. JSON-serializable; schema version 1.
    """
    report: dict = {"schema": 1, "cell_size": cell_size}
    if params:
        report["params"] = params

    geometry = _eval_geometry(list(gt) + list(pred), cell_size)
    if geometry is None:
        empty = {"tp": 0, "fp": 0, "fn": 0, "iou": None, "precision": None, "recall": None}
        report.update({"pixel": empty, "iou": None, "precision": None, "recall": None})
    else:
        block = _pixel_block(rasterize_polygons(pred, geometry), rasterize_polygons(gt, geometry))
        report["pixel"] = block
        report["iou"] = block["iou"]
        report["precision"] = block["precision"]
        report["recall"] = block["recall"]

    topo = topology_report(gt, pred)
    gt_hit, pred_hit = _hit_flags(list(gt), list(pred))
    report["topology"] = {cls: t.as_dict() for cls, t in topo.items()}
    report["topology"]["overall"] = ClassTopology(
        gt_total=len(gt),
        gt_intersecting=int(gt_hit.sum()),
        pred_total=len(pred),
        pred_intersecting=int(pred_hit.sum()),
    ).as_dict()

    quartiles: dict = {}
    for key, gts in (("overall", list(gt)),) + tuple(
        (cls, [p for p in gt if p.cls == cls]) for cls in CLASSES
    ):
        if len(gts) >= 4:
            q = quartile_analysis(gts, list(pred))
            quartiles[key] = {
                "rows": [r.as_dict() for r in q.rows],
                "overall": q.overall.as_dict(),
            }
        else:
            quartiles[key] = None
    report["quartiles"] = quartiles

    classes = {}
    for cls in CLASSES:
        gts = [p for p in gt if p.cls == cls]
        preds = [p for p in pred if p.cls == cls]
        if not gts and not preds:
            continue
        geometry_cls = _eval_geometry(gts + preds, cell_size)
        classes[cls] = {
            "pixel": _pixel_block(
                rasterize_polygons(preds, geometry_cls), rasterize_polygons(gts, geometry_cls)
            )
        }
    report["classes"] = classes
    return report
