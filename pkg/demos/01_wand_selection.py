"""Connected color thresholding ("wand") on a synthetic micrograph.

Paints two strokes inside the pool, grows the selection by color tolerance,
then finalizes (largest blob + pore filling) and saves the mask.
"""

import os

import numpy as np

from meltpool import annotate, raster
from meltpool.dataset import render_pool

out_dir = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(out_dir, exist_ok=True)

image, truth = render_pool(
    192, 52, 16.0, surface_row=76.0, center_col=96.0,
    noise_level=0.02, texture_amplitude=0.04, rng=np.random.default_rng(1),
)
raster.save_image(image, os.path.join(out_dir, "wand_input.png"))

# One stroke through the pool interior; tolerance admits the textured shade.
stroke = annotate.BrushStroke(points=((82, 70), (84, 96), (82, 120)), radius=3)
selected = annotate.wand_select(image, [stroke], tolerance=0.16)
print(f"stroke selected {selected.sum()} px (pool truth {truth.sum()} px)")

# A second stroke accumulates onto the existing selection.
stroke2 = annotate.BrushStroke(points=((100, 96),), radius=4)
selected = annotate.wand_select(image, [stroke2], tolerance=0.16, existing=selected)
final = annotate.finalize_mask(selected)
raster.save_mask(final, os.path.join(out_dir, "wand_mask.png"))
print(f"finalized mask: {final.sum()} px -> {out_dir}/wand_mask.png")
