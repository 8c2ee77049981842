"""Paired image/mask augmentation.

The geometric parameters (rotation, shift, shear, zoom) are composed into a
single affine resampling pass so interpolation blur is not compounded;
flips are applied afterwards as exact array reversals. Gamma is applied to
the image only. Masks are resampled nearest-neighbor and stay binary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .raster import validate_mask, validate_raster


@dataclass(frozen=True)
class AugmentationConfig:
    """Sampling ranges; defaults are the production values."""

    rotation_max: float = 20.0  # degrees, sampled in [-max, max]
    width_shift: float = 0.05  # fraction of width, [-s, s]
    height_shift: float = 0.05  # fraction of height, [-s, s]
    shear_max: float = 0.05  # radians, [-max, max]
    zoom_range: tuple[float, float] = (0.95, 1.05)
    gamma_range: tuple[float, float] = (0.2, 1.8)
    p_vflip: float = 0.5
    p_hflip: float = 0.5

    def __post_init__(self):
        if self.zoom_range[0] <= 0 or self.zoom_range[0] > self.zoom_range[1]:
            raise ValueError(f"bad zoom range {self.zoom_range}")
        if self.gamma_range[0] <= 0 or self.gamma_range[0] > self.gamma_range[1]:
            raise ValueError(f"bad gamma range {self.gamma_range}")
        for p in (self.p_vflip, self.p_hflip):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"flip probability {p} outside [0, 1]")


@dataclass(frozen=True)
class SampledAugmentation:
    rotation: float  # degrees
    dx: float  # fraction of width
    dy: float  # fraction of height
    shear: float  # radians
    zoom: float
    gamma: float
    vflip: bool
    hflip: bool

    @staticmethod
    def identity() -> "SampledAugmentation":
        return SampledAugmentation(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, False, False)


def sample(config: AugmentationConfig, seed) -> SampledAugmentation:
    """Draw one augmentation uniformly from the config ranges; deterministic per seed."""
    rng = np.random.default_rng(seed)
    return SampledAugmentation(
        rotation=rng.uniform(-config.rotation_max, config.rotation_max),
        dx=rng.uniform(-config.width_shift, config.width_shift),
        dy=rng.uniform(-config.height_shift, config.height_shift),
        shear=rng.uniform(-config.shear_max, config.shear_max),
        zoom=rng.uniform(*config.zoom_range),
        gamma=rng.uniform(*config.gamma_range),
        vflip=bool(rng.random() < config.p_vflip),
        hflip=bool(rng.random() < config.p_hflip),
    )


def _affine_matrix(aug: SampledAugmentation) -> np.ndarray:
    """Forward 2x2 matrix (rotation . shear . zoom) in (row, col) coordinates."""
    theta = math.radians(aug.rotation)
    rot = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    shear = np.array([[1.0, math.tan(aug.shear)], [0.0, 1.0]])
    zoom = np.eye(2) * aug.zoom
    return rot @ shear @ zoom


def transform_point(
    aug: SampledAugmentation, shape: tuple[int, int], point: tuple[float, float]
) -> tuple[float, float]:
    """Forward map of an input (row, col) under the full augmentation."""
    h, w = shape
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    t = np.array([aug.dy * h, aug.dx * w])
    m = _affine_matrix(aug)
    out = m @ (np.asarray(point, dtype=np.float64) - center + t) + center
    r, c = out
    if aug.vflip:
        r = (h - 1) - r
    if aug.hflip:
        c = (w - 1) - c
    return float(r), float(c)


def apply(
    image: np.ndarray,
    mask: np.ndarray,
    aug: SampledAugmentation,
    fill_mode: str = "reflect",
) -> tuple[np.ndarray, np.ndarray]:
    """Apply one sampled augmentation to a matched (image, mask) pair."""
    image = validate_raster(image)
    mask = validate_mask(mask)
    h, w = mask.shape
    if image.shape[:2] != (h, w):
        raise ValueError(f"image shape {image.shape[:2]} != mask shape {mask.shape}")

    geometric = aug.rotation != 0 or aug.dx != 0 or aug.dy != 0 or aug.shear != 0 or aug.zoom != 1
    if geometric:
        center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
        t = np.array([aug.dy * h, aug.dx * w])
        m = _affine_matrix(aug)
        # scipy's affine_transform maps output coords to input coords.
        m_inv = np.linalg.inv(m)
        offset = -m_inv @ center + center - t

        def warp(arr, order):
            return ndi.affine_transform(
                arr, m_inv, offset=offset, order=order, mode=fill_mode
            )

        if image.ndim == 2:
            out_image = warp(image, 1)
        else:
            out_image = np.stack([warp(image[:, :, c], 1) for c in range(3)], axis=2)
        out_image = np.clip(out_image, 0.0, 1.0)
        out_mask = warp(mask.astype(np.uint8), 0) > 0
    else:
        out_image = image.copy()
        out_mask = mask.copy()

    if aug.vflip:
        out_image = out_image[::-1]
        out_mask = out_mask[::-1]
    if aug.hflip:
        out_image = out_image[:, ::-1]
        out_mask = out_mask[:, ::-1]

    if aug.gamma != 1.0:
        out_image = np.power(out_image, aug.gamma)

    return np.ascontiguousarray(out_image), np.ascontiguousarray(out_mask)


def expand_dataset(
    pairs: list[tuple[np.ndarray, np.ndarray]],
    per_image: int,
    config: AugmentationConfig | None = None,
    seed: int = 0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Originals followed by ``per_image`` augmented variants of each.

    Output length is len(pairs) * (1 + per_image). Variant seeds are derived
    from (seed, pair index, variant index) so expansion is reproducible and
    per-item parallelizable.
    """
    if per_image < 0:
        raise ValueError("per_image must be >= 0")
    if config is None:
        config = AugmentationConfig()
    out = [(img.copy(), msk.copy()) for img, msk in pairs]
    for i, (img, msk) in enumerate(pairs):
        for j in range(per_image):
            aug = sample(config, [seed, i, j])
            out.append(apply(img, msk, aug))
    return out
