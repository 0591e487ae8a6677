"""Render every terrain representation for a small synthetic site.

Walks the first stage of the pipeline: build an elevation grid with a
few earthwork-like structures, derive the per-pixel terrain factors
(slope, hillshade, sky-view factor, positive openness, normalized
elevation), and write each one as an 8-bit PNG next to the 3-channel
composite the segmentation stage consumes.

Run:  python demos/01_terrain_gallery.py
"""

from pathlib import Path

from reliefseg import (
    ChannelStretch,
    StretchParams,
    compose_relief_image,
    compute_hillshade,
    compute_slope,
    compute_svf_and_openness,
    normalize_elevation,
    replicate_single_channel,
    write_image,
)
from reliefseg.synthetic import SceneSpec, make_structure_scene

out = Path(__file__).parent / "output" / "terrain_gallery"
out.mkdir(parents=True, exist_ok=True)

# A 256 px (128 m) scene: two flat-topped platform mounds and one ring.
grid, labels = make_structure_scene(SceneSpec(size_px=256, n_mesas=2, n_rings=1, seed=21))
print(f"scene: {grid.width}x{grid.height} px at {grid.cell_size} m, {len(labels)} structures")

# The horizon scan feeds both sky-view factor and openness, so compute
# them together; slope and hillshade come from the same Horn gradients.
svf, openness = compute_svf_and_openness(grid)
slope = compute_slope(grid)
hillshade = compute_hillshade(grid, azimuth_deg=315.0, altitude_deg=45.0)
elevation = normalize_elevation(grid)

stretch = StretchParams()
unit = ChannelStretch(0.0, 1.0)

write_image(replicate_single_channel(svf, stretch.svf), out / "svf.png")
write_image(replicate_single_channel(openness, stretch.openness), out / "po.png")
write_image(replicate_single_channel(slope, stretch.slope), out / "slope.png")
write_image(replicate_single_channel(hillshade, unit), out / "hs.png")
write_image(replicate_single_channel(elevation, unit), out / "elevation.png")

# The composite: svf, openness and slope stacked as RGB. Flat ground is
# bright in all three channels with the default stretches; structure
# rims go dark in the slope channel.
composite = compose_relief_image(svf, openness, slope, stretch)
write_image(composite, out / "sps.png")

for name in ("svf", "po", "slope", "hs", "elevation", "sps"):
    print(f"wrote {out / (name + '.png')}")
