"""Melt-pool geometry extraction: baseline, width/height/depth, angles.

Measures synthetic pools with known closed-form geometry and renders the
baseline/boundary overlay.
"""

import os

from meltpool import metrology, raster
from meltpool.dataset import analytic_metrics, render_pool

out_dir = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(out_dir, exist_ok=True)

print(f"{'r':>4} {'d/r':>5} | {'width':>12} {'depth':>12} {'alpha':>12}")
for radius, ratio in ((30, 0.0), (40, 0.3), (50, 0.5), (60, 0.75)):
    offset = radius * ratio
    side = max(180, 4 * radius)
    _, mask = render_pool(side, radius, offset, surface_row=float(side // 3), center_col=side / 2)
    truth = analytic_metrics(radius, offset, float(side // 3), side / 2)
    m = metrology.measure(mask, scale_um_per_px=2.0)
    print(
        f"{radius:>4} {ratio:>5.2f} | "
        f"{m.width_px:6.1f}/{truth.width_px:5.1f} "
        f"{m.depth_px:6.1f}/{truth.depth_px:5.1f} "
        f"{m.alpha_mean:6.1f}/{truth.alpha_mean:5.1f}"
    )
    overlay = metrology.render_overlay(mask, m)
    raster.save_image(overlay, os.path.join(out_dir, f"metrology_r{radius}.png"))
print(f"(measured/analytic; micrometer columns use 2 um/px)  overlays -> {out_dir}")
