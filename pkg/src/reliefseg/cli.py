"""Command-line interface: viz / dataset / infer / eval / ablate.

One JSON config file can hold every knob; flags override config values.
Exit codes: 0 success, 1 runtime error, 2 usage error. All subcommands
are deterministic given config + seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import DatasetConfig, build_dataset, scale_image_anisotropic
from .grid import DtmGrid, load_ascii_grid
from .imageio import write_image
from .inference import BackendSpec, InferenceConfig, multiscale_infer
from .labels import dump_geojson_labels, load_geojson_labels
from .metrics import build_eval_report, polygon_area, vectorize_mask
from .postproc import DEFAULT_MIN_BBOX_PX, filter_small_regions
from .terrain import (
    ChannelStretch,
    HorizonScanParams,
    StretchParams,
    compose_relief_image,
    compute_hillshade,
    compute_slope,
    compute_svf_and_openness,
    normalize_elevation,
    replicate_single_channel,
)

REPRESENTATIONS = ("sps", "svf", "po", "slope", "hs", "elevation")

_UNIT_STRETCH = ChannelStretch(0.0, 1.0)


def main(argv=None) -> None:
    sys.exit(run(argv if argv is not None else sys.argv[1:]))


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reliefseg",
        description="Relief-visualization segmentation pipeline for lidar terrain rasters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    viz = sub.add_parser("viz", help="render terrain representations from a DTM")
    _common_flags(viz)
    viz.add_argument("--dtm", required=True, help="ESRI ASCII grid (.asc) elevation raster")
    viz.add_argument("--out", required=True, help="output directory for PNG files")
    viz.add_argument(
        "--repr",
        default="all",
        choices=REPRESENTATIONS + ("all",),
        help="representation to render (sps = svf+po+slope composite)",
    )
    viz.set_defaults(func=_cmd_viz)

    dataset = sub.add_parser("dataset", help="build an augmented training dataset")
    _common_flags(dataset)
    dataset.add_argument("--dtm", required=True)
    dataset.add_argument("--labels", required=True, help="ground-truth GeoJSON FeatureCollection")
    dataset.add_argument("--out", required=True)
    dataset.add_argument("--class", dest="cls", choices=("platform", "annular"), default=None)
    dataset.add_argument("--variants", type=int, default=None, help="augmented variants per object")
    dataset.add_argument("--scales", default=None, help="comma-separated integer scales, e.g. 1,2")
    dataset.add_argument("--backgrounds", type=int, default=None, help="object-free tile count")
    dataset.add_argument("--tile-size", type=int, default=None)
    dataset.add_argument("--seed", type=int, default=None)
    dataset.add_argument("--rederive-terrain", action="store_true", default=None)
    dataset.set_defaults(func=_cmd_dataset)

    infer = sub.add_parser("infer", help="multi-scale sliding-window inference + post-filter")
    _common_flags(infer)
    infer.add_argument("--dtm", required=True)
    infer.add_argument("--out", required=True)
    infer.add_argument("--class", dest="cls", choices=("platform", "annular"), default=None)
    infer.add_argument("--repr", default="sps", choices=REPRESENTATIONS, help="input representation")
    infer.add_argument("--stride", type=int, default=None)
    infer.add_argument("--scales", default=None)
    infer.add_argument("--backend-cmd", default=None, help="subprocess backend command (whitespace-split); default in-process baseline")
    infer.add_argument("--timeout-s", type=float, default=None)
    infer.add_argument("--min-bbox-px", type=int, default=None)
    infer.add_argument("--rederive-terrain", action="store_true", default=None)
    infer.set_defaults(func=_cmd_infer)

    ev = sub.add_parser("eval", help="score predictions against ground truth")
    _common_flags(ev)
    ev.add_argument("--pred", required=True, help="predicted polygons GeoJSON")
    ev.add_argument("--gt", required=True, help="ground-truth polygons GeoJSON")
    ev.add_argument("--report", required=True, help="output JSON report path")
    ev.add_argument("--cell-size", type=float, default=None)
    ev.set_defaults(func=_cmd_eval)

    ablate = sub.add_parser(
        "ablate", help="run viz+infer+eval once per representation and summarize"
    )
    _common_flags(ablate)
    ablate.add_argument("--dtm", required=True)
    ablate.add_argument("--labels", required=True)
    ablate.add_argument("--out", required=True)
    ablate.add_argument("--class", dest="cls", choices=("platform", "annular"), default=None)
    ablate.add_argument("--representations", default=None, help="comma-separated subset of: " + ",".join(REPRESENTATIONS))
    ablate.add_argument("--stride", type=int, default=None)
    ablate.add_argument("--scales", default=None)
    ablate.add_argument("--min-bbox-px", type=int, default=None)
    ablate.set_defaults(func=_cmd_ablate)

    return parser


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default=None, help="JSON config file; flags override its values")
    sub.add_argument("--directions", type=int, default=None, help="horizon scan direction count")
    sub.add_argument("--radius-m", type=float, default=None, help="horizon scan radius, meters")
    sub.add_argument("--azimuth", type=float, default=None, help="hillshade sun azimuth, degrees")
    sub.add_argument("--altitude", type=float, default=None, help="hillshade sun altitude, degrees")


class _Settings:
    """Config-file values with flag overrides (flags win)."""

    def __init__(self, args):
        self.cfg = {}
        if getattr(args, "config", None):
            self.cfg = json.loads(Path(args.config).read_text())
        self.args = args

    def value(self, flag_name: str, *cfg_path, default=None):
        flag = getattr(self.args, flag_name, None)
        if flag is not None:
            return flag
        node = self.cfg
        for key in cfg_path:
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def scan_params(self) -> HorizonScanParams:
        return HorizonScanParams(
            n_directions=int(self.value("directions", "terrain", "n_directions", default=16)),
            radius_m=float(self.value("radius_m", "terrain", "radius_m", default=10.0)),
        )

    def stretch_params(self) -> StretchParams:
        node = self.cfg.get("terrain", {}).get("stretch", {})

        def chan(name, default):
            if name in node:
                lo, hi, invert = node[name]
                return ChannelStretch(float(lo), float(hi), bool(invert))
            return default

        base = StretchParams()
        return StretchParams(
            svf=chan("svf", base.svf),
            openness=chan("openness", base.openness),
            slope=chan("slope", base.slope),
        )

    def sun(self) -> tuple[float, float]:
        azimuth = float(self.value("azimuth", "terrain", "hillshade", "azimuth_deg", default=315.0))
        altitude = float(self.value("altitude", "terrain", "hillshade", "altitude_deg", default=45.0))
        return azimuth, altitude

    def provenance(self, **extra) -> dict:
        params = self.scan_params()
        stretch = self.stretch_params()
        azimuth, altitude = self.sun()
        out = {
            "n_directions": params.n_directions,
            "radius_m": params.radius_m,
            "stretch": {
                "svf": [stretch.svf.lo, stretch.svf.hi, stretch.svf.invert],
                "openness": [stretch.openness.lo, stretch.openness.hi, stretch.openness.invert],
                "slope": [stretch.slope.lo, stretch.slope.hi, stretch.slope.invert],
            },
            "hillshade": {"azimuth_deg": azimuth, "altitude_deg": altitude},
        }
        out.update(extra)
        return out


def _parse_scales(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(s) for s in text)
    return tuple(int(part) for part in str(text).split(",") if part.strip())


def _load_grid(path: str) -> DtmGrid:
    return load_ascii_grid(Path(path).read_text())


def _representation(name: str, grid: DtmGrid, settings: _Settings, cache: dict):
    """Build one 3-channel representation image, memoizing the scan."""
    stretch = settings.stretch_params()
    if name in ("sps", "svf", "po") and "svf_po" not in cache:
        cache["svf_po"] = compute_svf_and_openness(grid, settings.scan_params())
    if name in ("sps", "slope") and "slope" not in cache:
        cache["slope"] = compute_slope(grid)
    if name == "sps":
        svf, po = cache["svf_po"]
        return compose_relief_image(svf, po, cache["slope"], stretch)
    if name == "svf":
        return replicate_single_channel(cache["svf_po"][0], stretch.svf)
    if name == "po":
        return replicate_single_channel(cache["svf_po"][1], stretch.openness)
    if name == "slope":
        return replicate_single_channel(cache["slope"], stretch.slope)
    if name == "hs":
        azimuth, altitude = settings.sun()
        return replicate_single_channel(compute_hillshade(grid, azimuth, altitude), _UNIT_STRETCH)
    if name == "elevation":
        return replicate_single_channel(normalize_elevation(grid), _UNIT_STRETCH)
    raise ValueError(f"unknown representation {name!r}")


def _cmd_viz(args) -> int:
    settings = _Settings(args)
    grid = _load_grid(args.dtm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = REPRESENTATIONS if args.repr == "all" else (args.repr,)
    cache: dict = {}
    for name in names:
        write_image(_representation(name, grid, settings, cache), out / f"{name}.png")
    return 0


def _cmd_dataset(args) -> int:
    settings = _Settings(args)
    grid = _load_grid(args.dtm)
    labels = load_geojson_labels(Path(args.labels).read_text())
    cls = settings.value("cls", "dataset", "class", default="platform")
    variants = settings.value("variants", "dataset", "variants_per_object")
    config = DatasetConfig(
        cls=cls,
        variants_per_object=int(variants) if variants is not None else DatasetConfig.for_class(cls).variants_per_object,
        scales=_parse_scales(settings.value("scales", "dataset", "scales", default=(1, 2))),
        background_tile_count=int(settings.value("backgrounds", "dataset", "background_tile_count", default=0)),
        tile_size=int(settings.value("tile_size", "dataset", "tile_size", default=256)),
        rng_seed=int(settings.value("seed", "seed", default=0)),
    )
    result = build_dataset(
        grid,
        labels,
        config,
        args.out,
        terrain_params=settings.scan_params(),
        stretch=settings.stretch_params(),
        rederive_terrain=bool(settings.value("rederive_terrain", "dataset", "rederive_terrain", default=False)),
    )
    print(f"wrote {len(result.image_paths)} samples to {args.out}")
    return 0


def _cmd_infer(args) -> int:
    settings = _Settings(args)
    grid = _load_grid(args.dtm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cls = settings.value("cls", "inference", "class", default="platform")
    config = InferenceConfig(
        window=int(settings.value("window", "inference", "window", default=256)),
        stride=int(settings.value("stride", "inference", "stride", default=128)),
        scales=_parse_scales(settings.value("scales", "inference", "scales", default=(1, 2))),
        cls=cls,
    )
    backend_cmd = settings.value("backend_cmd", "inference", "backend", "command")
    if backend_cmd:
        command = tuple(backend_cmd.split()) if isinstance(backend_cmd, str) else tuple(backend_cmd)
        backend = BackendSpec(
            kind="subprocess",
            command=command,
            timeout_s=float(settings.value("timeout_s", "inference", "backend", "timeout_s", default=300.0)),
        )
    else:
        backend = BackendSpec()
    min_bbox = int(settings.value("min_bbox_px", "postproc", "min_bbox_px", default=DEFAULT_MIN_BBOX_PX))

    cache: dict = {}
    image = _representation(args.repr, grid, settings, cache)
    fine_image = None
    if 2 in config.scales and bool(
        settings.value("rederive_terrain", "inference", "rederive_terrain", default=False)
    ):
        fine_image = _representation(args.repr, scale_image_anisotropic(grid, 2), settings, {})

    raw = multiscale_infer(image, backend, config, fine_image=fine_image)
    mask = filter_small_regions(raw, min_bbox)
    polygons = vectorize_mask(mask, grid.geometry, cls=cls)

    write_image(mask, out / "mask.png")
    areas = {p.id: {"area_m2": polygon_area(p, validate=False)} for p in polygons}
    (out / "pred.geojson").write_text(dump_geojson_labels(polygons, extra_properties=areas))
    provenance = settings.provenance(
        representation=args.repr,
        window=config.window,
        stride=config.stride,
        scales=list(config.scales),
        min_bbox_px=min_bbox,
        backend=backend.kind,
        predicted_polygons=len(polygons),
        positive_pixels=mask.positive_count(),
    )
    (out / "infer.json").write_text(json.dumps({"schema": 1, **provenance}, indent=2, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    settings = _Settings(args)
    gt = load_geojson_labels(Path(args.gt).read_text())
    pred = load_geojson_labels(Path(args.pred).read_text())
    cell = float(settings.value("cell_size", "eval", "cell_size", default=0.5))
    report = build_eval_report(gt, pred, cell_size=cell, params=settings.provenance())
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_ablate(args) -> int:
    settings = _Settings(args)
    grid = _load_grid(args.dtm)
    gt = load_geojson_labels(Path(args.labels).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    wanted = settings.value("representations", "ablate", "representations")
    names = tuple(str(wanted).split(",")) if wanted else REPRESENTATIONS
    unknown = set(names) - set(REPRESENTATIONS)
    if unknown:
        raise ValueError(f"unknown representation(s): {sorted(unknown)}")

    cls = settings.value("cls", "inference", "class", default="platform")
    config = InferenceConfig(
        stride=int(settings.value("stride", "inference", "stride", default=128)),
        scales=_parse_scales(settings.value("scales", "inference", "scales", default=(1, 2))),
        cls=cls,
    )
    min_bbox = int(settings.value("min_bbox_px", "postproc", "min_bbox_px", default=DEFAULT_MIN_BBOX_PX))
    backend = BackendSpec()

    cache: dict = {}
    summary = {}
    for name in names:
        repr_dir = out / name
        repr_dir.mkdir(parents=True, exist_ok=True)
        image = _representation(name, grid, settings, cache)
        write_image(image, repr_dir / f"{name}.png")
        mask = filter_small_regions(multiscale_infer(image, backend, config), min_bbox)
        polygons = vectorize_mask(mask, grid.geometry, cls=cls)
        areas = {p.id: {"area_m2": polygon_area(p, validate=False)} for p in polygons}
        (repr_dir / "pred.geojson").write_text(dump_geojson_labels(polygons, extra_properties=areas))
        write_image(mask, repr_dir / "mask.png")
        report = build_eval_report(
            gt, polygons, cell_size=grid.cell_size, params=settings.provenance(representation=name)
        )
        (repr_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
        summary[name] = {
            "iou": report["iou"],
            "precision": report["precision"],
            "recall": report["recall"],
            "gt_pct": report["topology"]["overall"]["gt_pct"],
            "pred_pct": report["topology"]["overall"]["pred_pct"],
        }
    (out / "ablation.json").write_text(json.dumps({"schema": 1, "results": summary}, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    main()
