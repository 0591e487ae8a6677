"""Terrain-derivative segmentation pipeline for airborne lidar rasters.

The package covers the non-neural parts of a structure-segmentation
workflow: computing relief visualizations from an elevation model,
building augmented training tiles, running a pluggable segmentation
backend over large rasters with a two-scale sliding window, cleaning
masks, and scoring results with pixel and object-topology metrics.
"""

from .dataset import (
    DatasetConfig,
    DatasetSample,
    build_dataset,
    extract_object_tiles,
    augment_sample,
    rasterize_polygons,
    sample_background,
    scale_image_anisotropic,
)
from .grid import (
    AsciiGridError,
    BinaryMask,
    ChannelRaster,
    DtmGrid,
    GridGeometry,
    ReliefImage,
    dump_ascii_grid,
    load_ascii_grid,
)
from .imageio import read_image, read_mask, write_image
from .inference import (
    BackendSpec,
    InferenceConfig,
    ProtocolError,
    baseline_segment,
    downscale_mask_preserving_positive,
    multiscale_infer,
    run_backend_batch,
    sliding_window_infer,
)
from .labels import LabelledPolygon, dump_geojson_labels, load_geojson_labels
from .metrics import (
    EvalCounts,
    PixelMetrics,
    build_eval_report,
    pixel_metrics,
    polygon_area,
    polygons_intersect,
    quartile_analysis,
    topology_report,
    vectorize_mask,
)
from .postproc import Component, connected_components, filter_small_regions, morph
from .terrain import (
    ChannelStretch,
    HorizonScanParams,
    StretchParams,
    compose_relief_image,
    compute_hillshade,
    compute_horizon_angles,
    compute_positive_openness,
    compute_slope,
    compute_svf,
    compute_svf_and_openness,
    derive_relief_image,
    normalize_elevation,
    replicate_single_channel,
)

__all__ = [
    "AsciiGridError",
    "BackendSpec",
    "BinaryMask",
    "ChannelRaster",
    "ChannelStretch",
    "Component",
    "DatasetConfig",
    "DatasetSample",
    "DtmGrid",
    "EvalCounts",
    "GridGeometry",
    "HorizonScanParams",
    "InferenceConfig",
    "LabelledPolygon",
    "PixelMetrics",
    "ProtocolError",
    "ReliefImage",
    "StretchParams",
    "augment_sample",
    "baseline_segment",
    "build_dataset",
    "build_eval_report",
    "compose_relief_image",
    "compute_hillshade",
    "compute_horizon_angles",
    "compute_positive_openness",
    "compute_slope",
    "compute_svf",
    "compute_svf_and_openness",
    "connected_components",
    "derive_relief_image",
    "downscale_mask_preserving_positive",
    "dump_ascii_grid",
    "dump_geojson_labels",
    "extract_object_tiles",
    "filter_small_regions",
    "load_ascii_grid",
    "load_geojson_labels",
    "morph",
    "multiscale_infer",
    "normalize_elevation",
    "pixel_metrics",
    "polygon_area",
    "polygons_intersect",
    "quartile_analysis",
    "rasterize_polygons",
    "read_image",
    "read_mask",
    "replicate_single_channel",
    "run_backend_batch",
    "sample_background",
    "scale_image_anisotropic",
    "sliding_window_infer",
    "topology_report",
    "vectorize_mask",
    "write_image",
]
