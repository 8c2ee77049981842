"""Classical image-processing primitives for annotation and metrology.

Scalar fields are plain 2-d float ndarrays (finite values, unbounded range).
Coordinates are always (row, col).

Connectivity conventions: flood fill grows 4-connected (no leakage through
diagonal pixel corners of etched boundaries), component analysis is
8-connected (a diagonally linked blob counts as one object).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage as ndi
from scipy.spatial import cKDTree

from .raster import validate_mask, validate_raster

# 4- and 8-connected structuring elements for scipy.ndimage.label.
CROSS = ndi.generate_binary_structure(2, 1)
FULL = ndi.generate_binary_structure(2, 2)


def validate_field(field: np.ndarray) -> np.ndarray:
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ValueError(f"expected 2-d scalar field, got shape {field.shape}")
    if not np.isfinite(field).all():
        raise ValueError("scalar field contains non-finite values")
    return field


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-d Gaussian truncated at radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(field: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian convolution with reflect-padded borders."""
    field = validate_field(field)
    k = gaussian_kernel(sigma)
    out = ndi.convolve1d(field, k, axis=0, mode="reflect")
    out = ndi.convolve1d(out, k, axis=1, mode="reflect")
    return out


def sobel_magnitude(field: np.ndarray) -> np.ndarray:
    """Gradient magnitude sqrt(Gx^2 + Gy^2) with the standard 3x3 Sobel kernels."""
    field = validate_field(field)
    if field.shape[0] < 3 or field.shape[1] < 3:
        raise ValueError(f"field too small for a 3x3 kernel: {field.shape}")
    gx = ndi.sobel(field, axis=1, mode="reflect")
    gy = ndi.sobel(field, axis=0, mode="reflect")
    return np.hypot(gx, gy)


def inverse_gradient_energy(image: np.ndarray, alpha: float, sigma: float) -> np.ndarray:
    """Edge-stopping energy 1/sqrt(1 + alpha * |grad(G_sigma * I)|).

    Close to 1 in flat regions, close to 0 at strong edges; the contour
    evolution of :mod:`meltpool.annotate` halts where this drops below its
    threshold.
    """
    image = validate_raster(image)
    if image.ndim != 2:
        raise ValueError("energy field wants a grayscale image; call to_grayscale first")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    grad = sobel_magnitude(gaussian_blur(image, sigma))
    return 1.0 / np.sqrt(1.0 + alpha * grad)


def flood_fill_threshold(
    image: np.ndarray,
    seeds: list[tuple[int, int]],
    tolerance: float,
) -> np.ndarray:
    """Select pixels 4-connected to any seed with color close to a seed color.

    A pixel qualifies if its Euclidean distance in channel space to the
    *nearest* seed pixel color is <= tolerance; the result is the union of the
    4-connected regions of qualifying pixels that contain a seed.
    """
    image = validate_raster(image)
    if tolerance < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")
    if not seeds:
        return np.zeros(image.shape[:2], dtype=bool)
    h, w = image.shape[:2]
    channels = image.reshape(h, w, -1)
    seed_rc = np.asarray(seeds, dtype=np.int64).reshape(-1, 2)
    if (
        (seed_rc[:, 0] < 0).any()
        or (seed_rc[:, 0] >= h).any()
        or (seed_rc[:, 1] < 0).any()
        or (seed_rc[:, 1] >= w).any()
    ):
        bad = seed_rc[
            (seed_rc[:, 0] < 0)
            | (seed_rc[:, 0] >= h)
            | (seed_rc[:, 1] < 0)
            | (seed_rc[:, 1] >= w)
        ][0]
        raise ValueError(f"seed {tuple(bad)} outside image of shape {(h, w)}")

    colors = np.unique(channels[seed_rc[:, 0], seed_rc[:, 1]], axis=0)
    if len(colors) == 1:
        dist = np.linalg.norm(channels - colors[0], axis=2)
    else:
        dist, _ = cKDTree(colors).query(channels.reshape(-1, channels.shape[2]), k=1)
        dist = dist.reshape(h, w)
    in_range = dist <= tolerance

    labels, _ = ndi.label(in_range, structure=CROSS)
    seed_labels = np.unique(labels[seed_rc[:, 0], seed_rc[:, 1]])
    seed_labels = seed_labels[seed_labels > 0]
    return np.isin(labels, seed_labels)


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """8-connected labeling with labels ordered by row-major discovery.

    Returns (labels, sizes) where labels is int32 with 0 = background and
    sizes[i] is the pixel count of label i+1.
    """
    mask = validate_mask(mask)
    labels, count = ndi.label(mask, structure=FULL)
    if count == 0:
        return labels.astype(np.int32), np.zeros(0, dtype=np.int64)
    # Relabel so that label k is the k-th component encountered in scan order.
    flat = labels.ravel()
    first_seen = np.full(count + 1, flat.size, dtype=np.int64)
    nz = np.flatnonzero(flat)
    # Reverse order so earlier indices overwrite later ones.
    first_seen[flat[nz[::-1]]] = nz[::-1]
    order = np.argsort(first_seen[1:], kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, count + 1, dtype=np.int32)
    labels = remap[labels]
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:].astype(np.int64)
    return labels, sizes


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Keep only the largest 8-connected component (first in scan order on ties)."""
    labels, sizes = connected_components(mask)
    if sizes.size == 0:
        return np.zeros_like(mask, dtype=bool)
    return labels == (int(np.argmax(sizes)) + 1)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background regions not 4-connected to the image border.

    Interior pores are flipped to foreground; boundary-breaking pores open to
    the outside and are left alone.
    """
    mask = validate_mask(mask)
    bg_labels, count = ndi.label(~mask, structure=CROSS)
    if count == 0:
        return mask.copy()
    border = np.unique(
        np.concatenate(
            [bg_labels[0, :], bg_labels[-1, :], bg_labels[:, 0], bg_labels[:, -1]]
        )
    )
    border = set(border[border > 0].tolist())
    hole_labels = [lab for lab in range(1, count + 1) if lab not in border]
    if not hole_labels:
        return mask.copy()
    return mask | np.isin(bg_labels, hole_labels)


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Inner boundary: foreground pixels with a 4-neighbor outside the mask."""
    mask = validate_mask(mask)
    eroded = ndi.binary_erosion(mask, structure=CROSS, border_value=0)
    return mask & ~eroded
