"""Melt-track cross-section analysis: annotation, segmentation, metrology.

Submodules:

* :mod:`meltpool.raster` - image/mask arrays, file I/O, resizing
* :mod:`meltpool.imageops` - blur, Sobel, energy field, flood fill, components
* :mod:`meltpool.annotate` - MGAC candidate generation and wand selection
* :mod:`meltpool.augment` - paired image/mask augmentation
* :mod:`meltpool.unet` - U-Net model, training, prediction, grid search
* :mod:`meltpool.metrics` - accuracy / F1 / IoU evaluation
* :mod:`meltpool.metrology` - baseline, dimensions, wetting and wall angles
* :mod:`meltpool.dataset` - manifests and synthetic data generation
* :mod:`meltpool.service` - local HTTP annotation service
* :mod:`meltpool.cli` - command-line pipeline
"""

__version__ = "0.1.0"
