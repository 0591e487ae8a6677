from __future__ import annotations

import hashlib
import json

import numpy as np
import pytest

from reliefseg.dataset import (
    DatasetConfig,
    build_dataset,
    extract_object_tiles,
    make_augmented_sample,
    augment_sample,
    rasterize_pixel_rings,
    rasterize_polygons,
    sample_background,
    scale_image_anisotropic,
    seeded_split,
)
from reliefseg.grid import BinaryMask, GridGeometry
from reliefseg.labels import LabelledPolygon

from .conftest import make_grid
from .oracles import rasterize_bruteforce


def square(cls, x0, y0, size, pid="p"):
    ring = np.array(
        [[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]],
        dtype=float,
    )
    return LabelledPolygon(cls=cls, outer=ring, id=pid)


def pixel_square(cls, col0, row0, size, pid="p"):
    # pixel-frame polygon (x=col, y=row)
    return square(cls, col0, row0, size, pid)


class TestRasterize:
    def test_square_covering_exact_centers(self):
        # square spanning pixel corners (1,1)..(3,3) covers centers of a 2x2 block
        geometry = GridGeometry(width=5, height=5, cell_size=1.0, origin_x=0.0, origin_y=5.0)
        world_ring = np.array([[1, 4], [3, 4], [3, 2], [1, 2], [1, 4]], dtype=float)
        poly = LabelledPolygon(cls="platform", outer=world_ring)
        mask = rasterize_polygons([poly], geometry)
        assert mask.positive_count() == 4
        assert mask.pixels[1:3, 1:3].all()

    def test_matches_point_in_polygon_oracle(self, rng):
        for _ in range(5):
            pts = rng.uniform(1, 15, size=(6, 2))
            center = pts.mean(axis=0)
            angles = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
            ring = pts[np.argsort(angles)]
            ring = np.vstack([ring, ring[:1]])
            got = rasterize_pixel_rings([[ring]], 16, 16)
            want = rasterize_bruteforce([ring], 16, 16)
            assert np.array_equal(got, want)

    def test_empty_list_empty_mask(self):
        geometry = GridGeometry(width=4, height=4, cell_size=1.0)
        assert rasterize_polygons([], geometry).positive_count() == 0

    def test_ring_with_hole_is_annulus(self):
        outer = np.array([[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]], dtype=float)
        hole = np.array([[3, 3], [7, 3], [7, 7], [3, 7], [3, 3]], dtype=float)
        got = rasterize_pixel_rings([[outer, hole]], 10, 10)
        want = rasterize_bruteforce([outer, hole], 10, 10)
        assert np.array_equal(got, want)
        assert got[0, 0] and not got[5, 5]

    def test_overlapping_polygons_union(self):
        a = np.array([[0, 0], [6, 0], [6, 6], [0, 6], [0, 0]], dtype=float)
        b = np.array([[4, 4], [9, 4], [9, 9], [4, 9], [4, 4]], dtype=float)
        got = rasterize_pixel_rings([[a], [b]], 10, 10)
        assert got[5, 5]  # inside both
        assert got.sum() == 36 + 25 - 4


class TestExtractObjectTiles:
    def test_window_arithmetic(self, rng):
        image = rng.integers(0, 255, size=(700, 700, 3), dtype=np.uint8)
        obj = pixel_square("platform", 280, 380, 40, "o1")  # center (300, 400)
        (sample,) = extract_object_tiles(image, [obj], tile_size=256)
        assert sample.provenance.window == (172, 272)
        assert np.array_equal(sample.image, image[272:528, 172:428])

    def test_window_clamped_at_edge(self, rng):
        image = rng.integers(0, 255, size=(400, 400, 3), dtype=np.uint8)
        obj = pixel_square("platform", 0, 100, 20, "edge")  # center 10 px from left
        (sample,) = extract_object_tiles(image, [obj], tile_size=256)
        assert sample.provenance.window[0] == 0

    def test_one_tile_per_object(self, rng):
        image = rng.integers(0, 255, size=(600, 600, 3), dtype=np.uint8)
        objs = [pixel_square("platform", 100 + i * 60, 200, 30, f"o{i}") for i in range(5)]
        assert len(extract_object_tiles(image, objs)) == 5

    def test_small_image_rejected(self, rng):
        image = rng.integers(0, 255, size=(100, 100, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="smaller than tile"):
            extract_object_tiles(image, [pixel_square("platform", 10, 10, 20)])


class TestAugment:
    def make_scene(self, rng):
        image = rng.integers(0, 255, size=(512, 512, 3), dtype=np.uint8)
        obj = pixel_square("platform", 240, 240, 32, "focal")
        return image, obj

    def test_thin_clipped_instance_dropped(self, rng):
        image, obj = self.make_scene(rng)
        # tile covers cols [128, 384); this neighbor keeps only an 8 px sliver
        thin = pixel_square("platform", 376, 240, 32, "thin")
        sample = make_augmented_sample(image, [obj, thin], obj, 0.0, (0.0, 0.0))
        ids = {i.id for i in sample.instances}
        assert "focal" in ids
        assert "thin" not in ids

    def test_rotation_90_preserves_pixel_count_within_2pct(self, rng):
        image, obj = self.make_scene(rng)
        base = make_augmented_sample(image, [obj], obj, 0.0, (0.0, 0.0))
        rot = make_augmented_sample(image, [obj], obj, 90.0, (0.0, 0.0))
        count0 = rasterize_pixel_rings([list(p.rings) for p in base.instances], 256, 256).sum()
        count90 = rasterize_pixel_rings([list(p.rings) for p in rot.instances], 256, 256).sum()
        assert abs(count90 - count0) <= 0.02 * count0

    def test_same_seed_byte_identical(self, rng):
        image, obj = self.make_scene(rng)
        config = DatasetConfig(cls="platform", variants_per_object=1)
        a = augment_sample(image, [obj], obj, config, np.random.default_rng(42))
        b = augment_sample(image, [obj], obj, config, np.random.default_rng(42))
        assert np.array_equal(a.image, b.image)
        assert a.provenance.rotation_deg == b.provenance.rotation_deg
        assert len(a.instances) == len(b.instances)
        for pa, pb in zip(a.instances, b.instances):
            assert np.array_equal(pa.outer, pb.outer)

    def test_zero_rotation_zero_translation_is_a_crop(self, rng):
        image, obj = self.make_scene(rng)
        sample = make_augmented_sample(image, [obj], obj, 0.0, (0.0, 0.0))
        assert np.array_equal(sample.image, image[128:384, 128:384])


class TestSampleBackground:
    def test_labels_covering_image_error(self, rng):
        image = rng.integers(0, 255, size=(300, 300, 3), dtype=np.uint8)
        cover = pixel_square("platform", -5, -5, 400, "cover")
        with pytest.raises(ValueError, match="object-free"):
            sample_background(image, [cover], 1, 256, np.random.default_rng(0))

    def test_no_labels_any_window_valid(self, rng):
        image = rng.integers(0, 255, size=(300, 300, 3), dtype=np.uint8)
        tiles = sample_background(image, [], 4, 256, np.random.default_rng(0))
        assert len(tiles) == 4
        assert all(t.instances == [] for t in tiles)

    def test_windows_never_touch_labels(self, rng):
        image = rng.integers(0, 255, size=(400, 400, 3), dtype=np.uint8)
        labels = [pixel_square("platform", 20, 20, 60, "a"), pixel_square("platform", 300, 300, 50, "b")]
        gt = rasterize_pixel_rings([list(p.rings) for p in labels], 400, 400)
        tiles = sample_background(image, labels, 5, 128, np.random.default_rng(3))
        for t in tiles:
            col, row = t.provenance.window
            assert not gt[row : row + 128, col : col + 128].any()


class TestScaleAnisotropic:
    def test_dimensions_doubled(self, rng):
        image = rng.integers(0, 255, size=(80, 100, 3), dtype=np.uint8)
        out = scale_image_anisotropic(image, 2)
        assert out.shape == (160, 200, 3)

    def test_factor_one_identity(self, rng):
        image = rng.integers(0, 255, size=(40, 40, 3), dtype=np.uint8)
        assert np.array_equal(scale_image_anisotropic(image, 1), image)

    def test_mask_stays_binary(self, rng):
        mask = BinaryMask.from_array(rng.random((30, 30)) < 0.4)
        out = scale_image_anisotropic(mask, 2)
        assert out.pixels.dtype == bool
        assert out.width == 60 and out.height == 60

    def test_grid_elevations_not_exaggerated(self):
        grid = make_grid(np.array([[0.0, 10.0], [0.0, 10.0]]), cell_size=0.5)
        out = scale_image_anisotropic(grid, 2)
        assert out.cell_size == 0.25
        assert out.elevations.max() == 10.0
        assert out.elevations.min() == 0.0

    def test_non_integer_factor_rejected(self, rng):
        with pytest.raises(ValueError, match="integer"):
            scale_image_anisotropic(rng.integers(0, 255, size=(8, 8, 3), dtype=np.uint8), 1.5)


class TestSeededSplit:
    def test_partition_and_shares(self):
        train, val, test = seeded_split(100, (0.8, 0.1, 0.1), seed=3)
        assert (len(train), len(val), len(test)) == (80, 10, 10)
        assert sorted(train + val + test) == list(range(100))

    def test_deterministic(self):
        assert seeded_split(50, seed=9) == seeded_split(50, seed=9)
        assert seeded_split(50, seed=9) != seeded_split(50, seed=10)

    def test_bad_fractions_rejected(self):
        with pytest.raises(ValueError, match="sum to 1"):
            seeded_split(10, (0.5, 0.1, 0.1))


def _dataset_inputs():
    rng = np.random.default_rng(99)
    z = rng.normal(0, 0.05, size=(640, 640)).round(2)
    grid = make_grid(z, cell_size=0.5)
    # world frame: origin_y = 320.0; objects clustered in the north-west
    # so object-free 256 px windows exist in the south-east
    labels = [
        LabelledPolygon(
            cls="platform",
            outer=np.array(
                [[20 + i * 30, 290], [35 + i * 30, 290], [35 + i * 30, 305], [20 + i * 30, 305], [20 + i * 30, 290]],
                dtype=float,
            ),
            id=f"obj{i}",
        )
        for i in range(3)
    ]
    config = DatasetConfig(
        cls="platform",
        variants_per_object=2,
        scales=(1, 2),
        background_tile_count=2,
        tile_size=256,
        rng_seed=0,
    )
    return grid, labels, config


@pytest.fixture(scope="module")
def built_dataset(tmp_path_factory):
    grid, labels, config = _dataset_inputs()
    out = tmp_path_factory.mktemp("dataset")
    return build_dataset(grid, labels, config, out), out


class TestBuildDataset:
    def test_sample_count_formula(self, built_dataset):
        result, _ = built_dataset
        assert len(result.samples) == 3 * 2 * 2 + 2

    def test_class_defaults(self):
        assert DatasetConfig.for_class("platform").variants_per_object == 15
        assert DatasetConfig.for_class("annular").variants_per_object == 10

    def test_rerun_identical_hashes(self, built_dataset, tmp_path):
        r1, _ = built_dataset
        grid, labels, config = _dataset_inputs()
        r2 = build_dataset(grid, labels, config, tmp_path / "again")
        m1 = r1.manifest_path.read_text()
        m2 = r2.manifest_path.read_text()
        assert m1 == m2
        for p1, p2 in zip(r1.image_paths, r2.image_paths):
            assert hashlib.sha256(p1.read_bytes()).digest() == hashlib.sha256(p2.read_bytes()).digest()

    def test_no_instance_below_min_bbox(self, built_dataset):
        result, _ = built_dataset
        for sample in result.samples:
            for inst in sample.instances:
                x0, y0, x1, y1 = inst.bounds()
                assert x1 - x0 >= 10.0 and y1 - y0 >= 10.0

    def test_background_tiles_object_free(self, built_dataset):
        result, _ = built_dataset
        backgrounds = [s for s in result.samples if s.provenance.kind == "background"]
        assert len(backgrounds) == 2
        assert all(not s.instances for s in backgrounds)

    def test_manifest_lines_parse(self, built_dataset):
        result, _ = built_dataset
        lines = result.manifest_path.read_text().splitlines()
        assert len(lines) == len(result.samples)
        rec = json.loads(lines[0])
        assert {"image", "class", "sha256", "kind", "scale", "instances"} <= set(rec)
