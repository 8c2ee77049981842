"""Paired augmentation: rotation, shift, shear, zoom, flips, gamma.

Expands one (image, mask) pair into variants and tiles them for inspection.
"""

import os

import numpy as np

from meltpool import augment, raster
from meltpool.dataset import render_pool

out_dir = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(out_dir, exist_ok=True)

image, mask = render_pool(
    128, 36, 10.0, surface_row=52.0, center_col=64.0,
    noise_level=0.02, texture_amplitude=0.04, rng=np.random.default_rng(3),
)
config = augment.AugmentationConfig()  # production ranges

pairs = augment.expand_dataset([(image, mask)], per_image=7, config=config, seed=5)
print(f"1 pair -> {len(pairs)} pairs (original + 7 variants)")

tile_img = np.concatenate([img for img, _ in pairs], axis=1)
tile_msk = np.concatenate([m.astype(float) for _, m in pairs], axis=1)
raster.save_image(tile_img, os.path.join(out_dir, "augment_images.png"))
raster.save_image(tile_msk, os.path.join(out_dir, "augment_masks.png"))
for i, sampled in enumerate(augment.sample(config, [5, 0, j]) for j in range(3)):
    print(f"variant {i}: rot {sampled.rotation:+.1f} deg, zoom {sampled.zoom:.3f}, "
          f"gamma {sampled.gamma:.2f}, flips v={sampled.vflip} h={sampled.hflip}")
print(f"strips written to {out_dir}")
