"""Segment a full synthetic scene and score the result.

The whole inference side in one pass: derive the composite image,
sweep it with overlapping 256 px windows at native and 2x scale through
the deterministic baseline backend, OR-merge the per-window masks,
drop under-sized regions, vectorize to polygons, and evaluate against
the generating ground truth with pixel and object-topology metrics.

Swap `BackendSpec()` for
`BackendSpec(kind="subprocess", command=("segadapter", "--mock"))`
to push tiles through the external-adapter protocol instead.

Run:  python demos/03_segment_scene.py
"""

import json
import time
from pathlib import Path

from reliefseg import (
    BackendSpec,
    InferenceConfig,
    build_eval_report,
    derive_relief_image,
    dump_geojson_labels,
    filter_small_regions,
    multiscale_infer,
    polygon_area,
    vectorize_mask,
    write_image,
)
from reliefseg.synthetic import SceneSpec, make_structure_scene

out = Path(__file__).parent / "output" / "segmentation"
out.mkdir(parents=True, exist_ok=True)

start = time.perf_counter()
grid, labels = make_structure_scene(SceneSpec(size_px=768, n_mesas=8, n_rings=4, seed=5))
image = derive_relief_image(grid)
print(f"terrain derivation: {time.perf_counter() - start:.1f}s for {grid.width}x{grid.height} px")

config = InferenceConfig(window=256, stride=128, scales=(1, 2), cls="platform")
raw = multiscale_infer(image, BackendSpec(), config)
mask = filter_small_regions(raw, min_bbox_px=15)
print(f"positive pixels: raw {raw.positive_count()}, after size filter {mask.positive_count()}")

predictions = vectorize_mask(mask, grid.geometry, cls="platform")
areas = {p.id: {"area_m2": polygon_area(p, validate=False)} for p in predictions}
(out / "pred.geojson").write_text(dump_geojson_labels(predictions, extra_properties=areas))
write_image(mask, out / "mask.png")
print(f"{len(predictions)} predicted polygons -> {out / 'pred.geojson'}")

report = build_eval_report(labels, predictions, cell_size=grid.cell_size)
(out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))

topo = report["topology"]["overall"]
print(f"\npixel IoU {report['iou']:.3f}  precision {report['precision']:.3f}  recall {report['recall']:.3f}")
print(f"ground truth intersected: {topo['gt_intersecting']}/{topo['gt_total']} ({topo['gt_pct']:.1%})")
print(f"predictions intersecting: {topo['pred_intersecting']}/{topo['pred_total']} ({topo['pred_pct']:.1%})")
print(f"total {time.perf_counter() - start:.1f}s")
