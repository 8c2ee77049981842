"""Semi-automated mask generation.

Two workflows:

* morphological geodesic active contours (MGAC): a small seed ellipse placed
  inside the melt track is iteratively ballooned outward under an
  edge-stopping energy field until it conforms to the track boundary; a fan
  of 7 hyperparameter presets is evolved so the user can pick the best mask,
* connected color thresholding ("wand"): brush strokes seed a flood fill
  that selects connected pixels within a color tolerance, accumulating onto
  an existing selection.

All coordinates are (row, col); ellipse rotation is the angle of the a-axis
from the +col direction, in radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from . import imageops
from .raster import to_grayscale, validate_mask, validate_raster

# SI/IS structuring lines: the four 3x3 line elements of the morphological
# curvature operators.
_LINES = [
    np.eye(3, dtype=bool),
    np.array([[0, 1, 0]] * 3, dtype=bool),
    np.flipud(np.eye(3)).astype(bool),
    np.rot90([[0, 1, 0]] * 3).astype(bool),
]


@dataclass(frozen=True)
class SeedEllipse:
    """Initial nucleus placed inside the melt track."""

    center_row: float
    center_col: float
    semi_axis_a: float
    semi_axis_b: float
    rotation: float = 0.0

    def __post_init__(self):
        if self.semi_axis_a <= 0 or self.semi_axis_b <= 0:
            raise ValueError("ellipse semi-axes must be positive")


@dataclass(frozen=True)
class MgacParams:
    """One hyperparameter set for the contour evolution."""

    sigma: float
    alpha: float
    balloon: int = 1
    smoothing: int = 1
    threshold: float = 0.3
    iterations: int = 300
    label: str = ""

    def __post_init__(self):
        if self.sigma <= 0 or self.alpha <= 0:
            raise ValueError("sigma and alpha must be positive")
        if self.smoothing < 0 or self.smoothing > 4:
            raise ValueError("smoothing must be in [0, 4]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class BrushStroke:
    """Painted path: disks of the given radius at each point."""

    points: tuple[tuple[int, int], ...]
    radius: int = 3

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValueError("stroke has no points")
        if self.radius < 1:
            raise ValueError("stroke radius must be >= 1")


@dataclass
class CandidateSet:
    """The 7 candidate masks plus the flood-fill edge-detection preview."""

    candidates: list[np.ndarray]
    params: list[MgacParams]
    diagnostic: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.candidates) != 7 or len(self.params) != 7:
            raise ValueError("a candidate set holds exactly 7 masks")


def default_presets() -> list[MgacParams]:
    """The 7 evolution presets spanning edge sharpness and blur scale."""
    presets = []
    for sigma in (2.0, 4.0):
        for alpha in (100.0, 500.0, 1000.0):
            presets.append(
                MgacParams(sigma=sigma, alpha=alpha, label=f"sigma={sigma:g} alpha={alpha:g}")
            )
    presets.append(
        MgacParams(sigma=3.0, alpha=500.0, smoothing=3, label="sigma=3 alpha=500 smooth")
    )
    return presets


def rasterize_ellipse(seed: SeedEllipse, shape: tuple[int, int]) -> np.ndarray:
    """Foreground = pixels whose centers satisfy the ellipse inequality."""
    h, w = shape
    cos_t, sin_t = np.cos(seed.rotation), np.sin(seed.rotation)
    # Axis-aligned half-extents of the rotated ellipse.
    ext_col = np.hypot(seed.semi_axis_a * cos_t, seed.semi_axis_b * sin_t)
    ext_row = np.hypot(seed.semi_axis_a * sin_t, seed.semi_axis_b * cos_t)
    if (
        seed.center_row - ext_row < -0.5
        or seed.center_row + ext_row > h - 0.5
        or seed.center_col - ext_col < -0.5
        or seed.center_col + ext_col > w - 0.5
    ):
        raise ValueError(f"seed ellipse extends outside image of shape {shape}")
    rows, cols = np.mgrid[0:h, 0:w]
    dr = rows - seed.center_row
    dc = cols - seed.center_col
    u = dc * cos_t + dr * sin_t
    v = -dc * sin_t + dr * cos_t
    return (u / seed.semi_axis_a) ** 2 + (v / seed.semi_axis_b) ** 2 <= 1.0


def _sup_inf(u: np.ndarray) -> np.ndarray:
    return np.max([ndi.binary_erosion(u, line) for line in _LINES], axis=0)


def _inf_sup(u: np.ndarray) -> np.ndarray:
    return np.min([ndi.binary_dilation(u, line) for line in _LINES], axis=0)


def evolve_mgac(
    energy: np.ndarray,
    init: np.ndarray,
    params: MgacParams,
    iter_callback=None,
) -> np.ndarray:
    """Run the morphological geodesic active contour evolution.

    Each iteration: a balloon dilation/erosion gated to pixels where the
    energy exceeds the halt threshold, an attraction step that flips pixels
    along the sign of grad(energy) . grad(mask), then ``smoothing``
    alternating SIoIS / ISoSI curvature passes. Stops after ``iterations``
    or once the mask is unchanged for 3 consecutive iterations.
    """
    energy = imageops.validate_field(energy)
    init = validate_mask(init)
    if energy.shape != init.shape:
        raise ValueError(f"energy shape {energy.shape} != init shape {init.shape}")
    if not init.any():
        raise ValueError("initial mask is empty")

    denergy = np.gradient(energy)
    gate = energy > params.threshold

    u = init.copy()
    smooth_phase = 0
    unchanged = 0
    for iteration in range(params.iterations):
        prev = u.copy()

        if params.balloon > 0:
            aux = ndi.binary_dilation(u, imageops.FULL)
            u = np.where(gate, aux, u)
        elif params.balloon < 0:
            aux = ndi.binary_erosion(u, imageops.FULL, border_value=1)
            u = np.where(gate, aux, u)

        du = np.gradient(u.astype(np.float64))
        attraction = denergy[0] * du[0] + denergy[1] * du[1]
        u = u.copy()
        u[attraction > 0] = True
        u[attraction < 0] = False

        for _ in range(params.smoothing):
            if smooth_phase % 2 == 0:
                u = _sup_inf(_inf_sup(u))
            else:
                u = _inf_sup(_sup_inf(u))
            smooth_phase += 1

        if iter_callback is not None:
            iter_callback(iteration, u)

        unchanged = unchanged + 1 if np.array_equal(u, prev) else 0
        if unchanged >= 3:
            break
    return u.astype(bool)


def balloon_snapshots(
    energy: np.ndarray,
    init: np.ndarray,
    params: MgacParams,
    every: int = 25,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Evolve and record the mask every ``every`` iterations (progress views)."""
    snapshots: list[np.ndarray] = []

    def record(iteration, mask):
        if (iteration + 1) % every == 0:
            snapshots.append(mask.astype(bool).copy())

    final = evolve_mgac(energy, init, params, iter_callback=record)
    return final, snapshots


def generate_candidates(
    image: np.ndarray,
    seed: SeedEllipse,
    presets: list[MgacParams] | None = None,
) -> CandidateSet:
    """Evolve the 7 presets from the seed ellipse; deterministic.

    The energy field is built once per distinct (sigma, alpha). The returned
    set also carries the flood-filled edge-detection preview: the 4-connected
    non-edge region of the first preset's energy field around the seed.
    """
    image = validate_raster(image)
    if presets is None:
        presets = default_presets()
    if len(presets) != 7:
        raise ValueError(f"expected 7 presets, got {len(presets)}")

    gray = to_grayscale(image)
    init = rasterize_ellipse(seed, gray.shape)

    grad_cache: dict[float, np.ndarray] = {}
    energy_cache: dict[tuple[float, float], np.ndarray] = {}

    def energy_for(p: MgacParams) -> np.ndarray:
        key = (p.sigma, p.alpha)
        if key not in energy_cache:
            if p.sigma not in grad_cache:
                grad_cache[p.sigma] = imageops.sobel_magnitude(
                    imageops.gaussian_blur(gray, p.sigma)
                )
            energy_cache[key] = 1.0 / np.sqrt(1.0 + p.alpha * grad_cache[p.sigma])
        return energy_cache[key]

    candidates = [evolve_mgac(energy_for(p), init, p) for p in presets]

    first_energy = energy_for(presets[0])
    open_region, _ = ndi.label(first_energy > presets[0].threshold, structure=imageops.CROSS)
    seed_labels = np.unique(open_region[init])
    seed_labels = seed_labels[seed_labels > 0]
    diagnostic = np.isin(open_region, seed_labels)

    return CandidateSet(candidates=candidates, params=list(presets), diagnostic=diagnostic)


def stroke_seeds(strokes: list[BrushStroke], shape: tuple[int, int]) -> list[tuple[int, int]]:
    """All pixels under the stroke disks, clamped into bounds."""
    h, w = shape
    covered = np.zeros(shape, dtype=bool)
    for stroke in strokes:
        r = stroke.radius
        dr, dc = np.mgrid[-r : r + 1, -r : r + 1]
        disk = dr**2 + dc**2 <= r**2
        for pr, pc in stroke.points:
            pr = int(np.clip(pr, 0, h - 1))
            pc = int(np.clip(pc, 0, w - 1))
            rows = np.clip(pr + dr[disk], 0, h - 1)
            cols = np.clip(pc + dc[disk], 0, w - 1)
            covered[rows, cols] = True
    return [tuple(rc) for rc in np.argwhere(covered)]


def wand_select(
    image: np.ndarray,
    strokes: list[BrushStroke],
    tolerance: float,
    existing: np.ndarray | None = None,
) -> np.ndarray:
    """Flood-fill selection seeded by brush strokes, unioned onto ``existing``."""
    image = validate_raster(image)
    base = (
        np.zeros(image.shape[:2], dtype=bool)
        if existing is None
        else validate_mask(existing).copy()
    )
    if not strokes:
        return base
    seeds = stroke_seeds(strokes, image.shape[:2])
    return base | imageops.flood_fill_threshold(image, seeds, tolerance)


def finalize_mask(mask: np.ndarray) -> np.ndarray:
    """Keep the largest component and fill interior holes (pore policy)."""
    mask = validate_mask(mask)
    if not mask.any():
        raise ValueError("no selection")
    return imageops.fill_holes(imageops.largest_component(mask))
