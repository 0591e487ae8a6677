"""Training-set construction: rasterization, tiling, augmentation, manifests.

Datasets are per-class: one focal class is tiled and augmented at each
configured scale, plus a batch of object-free background tiles. Every
emitted sample is reproducible from the manifest (scale, rotation,
translation, seed), and generation is a pure function of
(grid, labels, config).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import BinaryMask, DtmGrid, GridGeometry, ReliefImage
from .imageio import write_image
from .labels import LabelledPolygon, clip_polygon_to_rect, polygon_bbox_size
from .terrain import HorizonScanParams, StretchParams, derive_relief_image

#: Instances whose post-augmentation bounding box is narrower than this
#: in either dimension are dropped from the labels (tiny clipped slivers
#: carry no learnable shape).
MIN_INSTANCE_BBOX_PX = 10.0

#: Augmentation translation range, in pixels per axis (quarter tile).
TRANSLATION_RANGE_PX = 64.0


@dataclass(frozen=True)
class DatasetConfig:
    """Generation parameters for one per-class dataset."""

    cls: str
    variants_per_object: int
    scales: tuple[int, ...] = (1, 2)
    background_tile_count: int = 0
    tile_size: int = 256
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.variants_per_object < 1:
            raise ValueError(f"variants_per_object must be >= 1, got {self.variants_per_object}")
        if self.tile_size <= 0:
            raise ValueError(f"tile_size must be positive, got {self.tile_size}")
        if not self.scales:
            raise ValueError("scales must be non-empty")
        if any(int(s) < 1 or int(s) != s for s in self.scales):
            raise ValueError(f"scales must be integers >= 1, got {self.scales}")
        if self.background_tile_count < 0:
            raise ValueError("background_tile_count must be >= 0")

    @classmethod
    def for_class(cls, name: str, **overrides) -> "DatasetConfig":
        """Defaults per class: 15 variants for platforms (diverse shapes),
        10 for the mostly rotation-symmetric annular structures."""
        variants = {"platform": 15, "annular": 10}.get(name)
        if variants is None:
            raise ValueError(f"unknown class {name!r}")
        overrides.setdefault("variants_per_object", variants)
        return cls(cls=name, **overrides)


@dataclass(frozen=True)
class SampleProvenance:
    kind: str  # "augment" | "background" | "tile"
    scale: int
    window: tuple[int, int]  # (col, row) of the nominal source window origin
    rotation_deg: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)
    seed: tuple[int, ...] = ()
    object_id: str = ""
    variant: int = -1


@dataclass
class DatasetSample:
    """One emitted tile: image plus instances in tile pixel coordinates."""

    image: np.ndarray  # (tile, tile, 3) uint8
    instances: list[LabelledPolygon]
    provenance: SampleProvenance

    def __post_init__(self) -> None:
        tile_h, tile_w = self.image.shape[:2]
        for inst in self.instances:
            w, h = polygon_bbox_size(inst)
            if w < MIN_INSTANCE_BBOX_PX or h < MIN_INSTANCE_BBOX_PX:
                raise ValueError(
                    f"instance {inst.id!r} bbox {w:.1f}x{h:.1f} below {MIN_INSTANCE_BBOX_PX} px"
                )
            x0, y0, x1, y1 = inst.bounds()
            if x0 < 0 or y0 < 0 or x1 > tile_w or y1 > tile_h:
                raise ValueError(f"instance {inst.id!r} extends outside the tile")


# ---------------------------------------------------------------------------
# Rasterization (pixel-center, even-odd, half-open boundaries)
# ---------------------------------------------------------------------------


def _fill_rings(out: np.ndarray, rings) -> None:
    """Even-odd scanline fill of one polygon (outer + holes) into ``out``.

    Pixel (r, c) is set iff its center (c+0.5, r+0.5) is inside. Edge
    crossings use the half-open rule (y1 <= yc < y2), and spans fill
    half-open [xa, xb) so centers exactly on a left/top edge count as
    inside and on a right/bottom edge as outside.
    """
    height, width = out.shape
    x1s, y1s, x2s, y2s = [], [], [], []
    for ring in rings:
        v = np.asarray(ring, dtype=np.float64)
        x1s.append(v[:-1, 0])
        y1s.append(v[:-1, 1])
        x2s.append(v[1:, 0])
        y2s.append(v[1:, 1])
    x1 = np.concatenate(x1s)
    y1 = np.concatenate(y1s)
    x2 = np.concatenate(x2s)
    y2 = np.concatenate(y2s)

    ymin = max(0, int(math.floor(y1.min() if len(y1) else 0)))
    ymax = min(height, int(math.ceil(max(y1.max(), y2.max()))) + 1) if len(y1) else 0
    for r in range(ymin, ymax):
        yc = r + 0.5
        hit = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
        if not hit.any():
            continue
        xs = x1[hit] + (yc - y1[hit]) * (x2[hit] - x1[hit]) / (y2[hit] - y1[hit])
        xs.sort()
        for i in range(0, len(xs) - 1, 2):
            c0 = max(0, math.ceil(xs[i] - 0.5))
            c1 = min(width, math.ceil(xs[i + 1] - 0.5))
            if c1 > c0:
                out[r, c0:c1] = True


def rasterize_pixel_rings(ring_groups, width: int, height: int) -> np.ndarray:
    """OR-union of even-odd fills; one ring group (outer + holes) per polygon."""
    out = np.zeros((height, width), dtype=bool)
    for rings in ring_groups:
        if rings:
            _fill_rings(out, rings)
    return out


def rasterize_polygons(polygons, geometry: GridGeometry) -> BinaryMask:
    """Burn world-coordinate polygons into a pixel mask.

    A pixel is set iff its center lies inside the outer ring and outside
    every hole; overlapping polygons union.
    """
    groups = []
    for poly in polygons:
        rings = []
        for ring in poly.rings:
            v = np.asarray(ring, dtype=np.float64)
            cols = (v[:, 0] - geometry.origin_x) / geometry.cell_size
            rows = (geometry.origin_y - v[:, 1]) / geometry.cell_size
            rings.append(np.stack([cols, rows], axis=1))
        groups.append(rings)
    pixels = rasterize_pixel_rings(groups, geometry.width, geometry.height)
    return BinaryMask.from_array(pixels)


def polygons_to_pixel_frame(polygons, geometry: GridGeometry) -> list[LabelledPolygon]:
    """Re-express world polygons in (col, row) pixel coordinates."""

    def to_px(v: np.ndarray) -> np.ndarray:
        cols = (v[:, 0] - geometry.origin_x) / geometry.cell_size
        rows = (geometry.origin_y - v[:, 1]) / geometry.cell_size
        return np.stack([cols, rows], axis=1)

    return [p.transformed(to_px) for p in polygons]


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def _bilinear_sample(image: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample image values at fractional index coordinates, 0 outside."""
    h, w = image.shape[:2]
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    values = image.astype(np.float64)
    if values.ndim == 2:
        values = values[..., None]
    out = np.zeros((*x.shape, values.shape[-1]), dtype=np.float64)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = x0 + dx
            yi = y0 + dy
            inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            wgt = (wy * wx) * inside
            vals = values[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
            out += wgt[..., None] * vals
    return out


def scale_image_anisotropic(source, factor: int = 2):
    """Stretch the planar (X, Y) dimensions by an integer factor.

    Image channels resample bilinearly, masks nearest-neighbor. Applied
    to a :class:`DtmGrid` the elevation *values* are untouched (no
    vertical exaggeration); only the sampling density changes, so
    ``cell_size`` divides by the factor.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    if isinstance(source, BinaryMask):
        if factor == 1:
            return source
        idx_r = np.round((np.arange(source.height * factor) + 0.5) / factor - 0.5).astype(int)
        idx_c = np.round((np.arange(source.width * factor) + 0.5) / factor - 0.5).astype(int)
        idx_r = np.clip(idx_r, 0, source.height - 1)
        idx_c = np.clip(idx_c, 0, source.width - 1)
        return BinaryMask.from_array(source.pixels[np.ix_(idx_r, idx_c)])
    if isinstance(source, DtmGrid):
        if factor == 1:
            return source
        h, w = source.height * factor, source.width * factor
        ys = (np.arange(h) + 0.5) / factor - 0.5
        xs = (np.arange(w) + 0.5) / factor - 0.5
        gx, gy = np.meshgrid(xs, ys)
        sampled = _bilinear_nan(source.masked_elevations(), gx, gy)
        nodata = ~np.isfinite(sampled)
        return DtmGrid(
            width=w,
            height=h,
            cell_size=source.cell_size / factor,
            origin_x=source.origin_x,
            origin_y=source.origin_y,
            elevations=np.where(nodata, 0.0, sampled),
            nodata=nodata,
            crs=source.crs,
        )
    if isinstance(source, ReliefImage):
        arr = scale_image_anisotropic(np.asarray(source.channels), factor)
        return ReliefImage(
            width=source.width * factor,
            height=source.height * factor,
            channels=arr,
            stretch=source.stretch,
        )
    arr = np.asarray(source)
    if factor == 1:
        return arr.copy()
    h, w = arr.shape[0] * factor, arr.shape[1] * factor
    ys = (np.arange(h) + 0.5) / factor - 0.5
    xs = (np.arange(w) + 0.5) / factor - 0.5
    gx, gy = np.meshgrid(xs, ys)
    out = _bilinear_sample(arr, gx, gy)
    if arr.ndim == 2:
        out = out[..., 0]
    if np.issubdtype(arr.dtype, np.integer):
        out = np.floor(out + 0.5).astype(arr.dtype)
    return out


def _bilinear_nan(values: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear sampling where NaN neighbors poison the result (used for
    elevation grids so nodata propagates conservatively)."""
    h, w = values.shape
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    out = np.zeros(x.shape, dtype=np.float64)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = np.clip(x0 + dx, 0, w - 1)
            yi = np.clip(y0 + dy, 0, h - 1)
            out += (wy * wx) * values[yi, xi]
    return out


# ---------------------------------------------------------------------------
# Tiling and augmentation
# ---------------------------------------------------------------------------


def _image_array(image) -> np.ndarray:
    if isinstance(image, ReliefImage):
        return np.asarray(image.channels)
    return np.asarray(image)


def _clip_instances_to_tile(labels, tile_size: int) -> list[LabelledPolygon]:
    """Clip label polygons to the tile and apply the minimum-bbox rule."""
    kept = []
    for poly in labels:
        clipped = clip_polygon_to_rect(poly, 0.0, 0.0, float(tile_size), float(tile_size))
        if clipped is None:
            continue
        w, h = polygon_bbox_size(clipped)
        if w < MIN_INSTANCE_BBOX_PX or h < MIN_INSTANCE_BBOX_PX:
            continue
        kept.append(clipped)
    return kept


def _object_center(poly: LabelledPolygon) -> tuple[float, float]:
    x0, y0, x1, y1 = poly.bounds()
    return (x0 + x1) / 2.0, (y0 + y1) / 2.0


def extract_object_tiles(image, labels, tile_size: int = 256) -> list[DatasetSample]:
    """One axis-aligned tile per labeled object, centered on it.

    The window origin is round(bbox center) - tile_size/2, clamped so
    the window stays inside the image; every label intersecting the
    window is included (after the minimum-bbox rule).
    """
    arr = _image_array(image)
    h, w = arr.shape[:2]
    if h < tile_size or w < tile_size:
        raise ValueError(f"image {w}x{h} smaller than tile size {tile_size}")
    samples = []
    for obj in labels:
        cx, cy = _object_center(obj)
        col = min(max(int(math.floor(cx + 0.5)) - tile_size // 2, 0), w - tile_size)
        row = min(max(int(math.floor(cy + 0.5)) - tile_size // 2, 0), h - tile_size)
        tile = arr[row : row + tile_size, col : col + tile_size].copy()

        def shift(v: np.ndarray, dc=col, dr=row) -> np.ndarray:
            return v - np.array([dc, dr], dtype=np.float64)

        shifted = [p.transformed(shift) for p in labels]
        instances = _clip_instances_to_tile(shifted, tile_size)
        samples.append(
            DatasetSample(
                image=tile,
                instances=instances,
                provenance=SampleProvenance(
                    kind="tile", scale=1, window=(col, row), object_id=obj.id
                ),
            )
        )
    return samples


def make_augmented_sample(
    image,
    labels,
    obj: LabelledPolygon,
    rotation_deg: float,
    translation: tuple[float, float],
    tile_size: int = 256,
    scale: int = 1,
    seed: tuple[int, ...] = (),
    variant: int = -1,
) -> DatasetSample:
    """Deterministic core of augmentation: rotate about the object
    center, shift it inside the tile, resample, transform labels exactly.

    The image is warped with bilinear resampling; label polygons get the
    same affine applied to their vertices, then the tile clip and the
    minimum-bbox rule. Out-of-source pixels read as 0.
    """
    arr = _image_array(image)
    cx, cy = _object_center(obj)
    theta = math.radians(rotation_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    tcx = tile_size / 2.0 + translation[0]
    tcy = tile_size / 2.0 + translation[1]

    # forward affine: tile = R (p - obj_center) + tile_center + translation
    def forward(v: np.ndarray) -> np.ndarray:
        dx = v[:, 0] - cx
        dy = v[:, 1] - cy
        return np.stack([cos_t * dx - sin_t * dy + tcx, sin_t * dx + cos_t * dy + tcy], axis=1)

    cols = np.arange(tile_size) + 0.5
    rows = np.arange(tile_size) + 0.5
    gx, gy = np.meshgrid(cols, rows)
    ox = gx - tcx
    oy = gy - tcy
    sx = cos_t * ox + sin_t * oy + cx
    sy = -sin_t * ox + cos_t * oy + cy
    warped = _bilinear_sample(arr, sx - 0.5, sy - 0.5)
    tile = np.floor(warped + 0.5).astype(np.uint8)

    transformed = [p.transformed(forward) for p in labels]
    instances = _clip_instances_to_tile(transformed, tile_size)
    nominal_col = int(math.floor(cx + 0.5)) - tile_size // 2
    nominal_row = int(math.floor(cy + 0.5)) - tile_size // 2
    return DatasetSample(
        image=tile,
        instances=instances,
        provenance=SampleProvenance(
            kind="augment",
            scale=scale,
            window=(nominal_col, nominal_row),
            rotation_deg=rotation_deg,
            translation=translation,
            seed=seed,
            object_id=obj.id,
            variant=variant,
        ),
    )


def augment_sample(
    image,
    labels,
    obj: LabelledPolygon,
    config: DatasetConfig,
    rng: np.random.Generator,
    scale: int = 1,
    seed: tuple[int, ...] = (),
    variant: int = -1,
) -> DatasetSample:
    """Draw a random rotation (uniform [0, 360)) and translation
    (uniform [-64, +64] px per axis) and build the sample."""
    rotation = float(rng.uniform(0.0, 360.0))
    translation = (
        float(rng.uniform(-TRANSLATION_RANGE_PX, TRANSLATION_RANGE_PX)),
        float(rng.uniform(-TRANSLATION_RANGE_PX, TRANSLATION_RANGE_PX)),
    )
    return make_augmented_sample(
        image,
        labels,
        obj,
        rotation,
        translation,
        tile_size=config.tile_size,
        scale=scale,
        seed=seed,
        variant=variant,
    )


def sample_background(
    image, labels, count: int, tile_size: int, rng: np.random.Generator, scale: int = 1
) -> list[DatasetSample]:
    """Uniform rejection sampling of windows containing zero label pixels.

    Gives up with an error after 1000 * count rejected windows.
    """
    if count == 0:
        return []
    arr = _image_array(image)
    h, w = arr.shape[:2]
    if h < tile_size or w < tile_size:
        raise ValueError(f"image {w}x{h} smaller than tile size {tile_size}")
    gt = rasterize_pixel_rings([list(p.rings) for p in labels], w, h)
    samples: list[DatasetSample] = []
    rejections = 0
    budget = 1000 * count
    while len(samples) < count:
        col = int(rng.integers(0, w - tile_size + 1))
        row = int(rng.integers(0, h - tile_size + 1))
        if gt[row : row + tile_size, col : col + tile_size].any():
            rejections += 1
            if rejections >= budget:
                raise ValueError(
                    f"could not find {count} object-free windows after {rejections} rejections"
                )
            continue
        samples.append(
            DatasetSample(
                image=arr[row : row + tile_size, col : col + tile_size].copy(),
                instances=[],
                provenance=SampleProvenance(kind="background", scale=scale, window=(col, row)),
            )
        )
    return samples


# ---------------------------------------------------------------------------
# Whole-dataset build
# ---------------------------------------------------------------------------


def seeded_split(
    count: int, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0
) -> tuple[list[int], list[int], list[int]]:
    """Deterministic train/val/test index split.

    Fractions must sum to 1; the first two groups take floor shares and
    the test group absorbs the remainder.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(count)
    n_train = int(count * fractions[0])
    n_val = int(count * fractions[1])
    train = sorted(int(i) for i in order[:n_train])
    val = sorted(int(i) for i in order[n_train : n_train + n_val])
    test = sorted(int(i) for i in order[n_train + n_val :])
    return train, val, test


def _stable_id_hash(object_id: str) -> int:
    return int.from_bytes(hashlib.sha256(object_id.encode("utf-8")).digest()[:8], "big")


def _sample_rng(entropy: tuple[int, ...]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


@dataclass
class DatasetBuildResult:
    manifest_path: Path
    image_paths: list[Path]
    samples: list[DatasetSample]


def build_dataset(
    grid: DtmGrid,
    labels,
    config: DatasetConfig,
    out_dir: str | os.PathLike,
    terrain_params: HorizonScanParams | None = None,
    stretch: StretchParams | None = None,
    rederive_terrain: bool = False,
) -> DatasetBuildResult:
    """Generate the per-class dataset directory.

    Layout: ``images/NNNNNN.png`` plus ``manifest.jsonl`` with one JSON
    sample record per line (provenance, instance polygons in tile pixel
    coordinates, content hash). For each scale the composite image is
    stretched in (X, Y) only; ``rederive_terrain`` recomputes the
    terrain derivatives from the rescaled elevation grid instead (the
    slower, from-first-principles variant). Total sample count is
    objects * variants * scales + background_tile_count; samples whose
    labels were all clipped away still count (labels drop, samples
    stay).
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)

    relief_native = derive_relief_image(grid, terrain_params, stretch)
    class_labels = [p for p in labels if p.cls == config.cls]
    labels_native = polygons_to_pixel_frame(class_labels, grid.geometry)

    samples: list[DatasetSample] = []
    for scale in sorted(int(s) for s in config.scales):
        if scale == 1:
            image = relief_native
            labels_px = labels_native
        else:
            if rederive_terrain:
                image = derive_relief_image(
                    scale_image_anisotropic(grid, scale), terrain_params, stretch
                )
            else:
                image = scale_image_anisotropic(relief_native, scale)
            labels_px = [p.transformed(lambda v, s=scale: v * s) for p in labels_native]
        for oi, obj in enumerate(labels_px):
            for variant in range(config.variants_per_object):
                entropy = (config.rng_seed, scale, _stable_id_hash(obj.id), variant)
                rng = _sample_rng(entropy)
                samples.append(
                    augment_sample(
                        image,
                        labels_px,
                        obj,
                        config,
                        rng,
                        scale=scale,
                        seed=entropy,
                        variant=variant,
                    )
                )

    if config.background_tile_count:
        entropy = (config.rng_seed, 0xBAC4)
        rng = _sample_rng(entropy)
        samples.extend(
            sample_background(
                relief_native,
                labels_native,
                config.background_tile_count,
                config.tile_size,
                rng,
            )
        )

    image_paths: list[Path] = []
    manifest_path = out / "manifest.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for index, sample in enumerate(samples):
            rel = f"images/{index:06d}.png"
            path = out / rel
            write_image(sample.image, path)
            image_paths.append(path)
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            record = {
                "index": index,
                "image": rel,
                "class": config.cls,
                "sha256": digest,
                "kind": sample.provenance.kind,
                "scale": sample.provenance.scale,
                "window": list(sample.provenance.window),
                "rotation_deg": sample.provenance.rotation_deg,
                "translation": list(sample.provenance.translation),
                "seed": list(sample.provenance.seed),
                "object_id": sample.provenance.object_id,
                "variant": sample.provenance.variant,
                "instances": [
                    {
                        "class": inst.cls,
                        "id": inst.id,
                        "outer": np.asarray(inst.outer).tolist(),
                        "holes": [np.asarray(h).tolist() for h in inst.holes],
                        "bbox": list(inst.bounds()),
                    }
                    for inst in sample.instances
                ],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return DatasetBuildResult(manifest_path=manifest_path, image_paths=image_paths, samples=samples)
